#pragma once

#include <map>
#include <string>
#include <vector>

namespace xnec::cluster {

// Sparse TF-IDF vector, L2-normalised unless the document had no tokens.
struct TextVector {
  std::string vid;
  std::map<std::string, double> weights;
  bool empty = false;  // no tokens; all-zero vector
};

// Lowercased maximal runs of ASCII alphanumerics (bytes >= 0x80 are kept
// inside tokens so UTF-8 words survive intact).
std::vector<std::string> tokenize(const std::string& text);

// Smoothed inverse document frequency: ln((1 + n_docs) / (1 + df)) + 1.
double smoothed_idf(std::size_t n_docs, std::size_t document_frequency);

// Raw term count times smoothed idf, then L2 normalisation. Output is sorted by vid.
std::vector<TextVector> vectorize(const std::map<std::string, std::string>& messages);

// 1 - cosine similarity, clamped to [0, 1]. A zero vector is at distance 1
// from everything, itself included.
double cosine_distance(const TextVector& a, const TextVector& b);

struct Merge {
  std::size_t a = 0;  // node ids: leaves 0..n-1 (sorted vid order), merges n, n+1, ...
  std::size_t b = 0;
  double distance = 0.0;
  std::size_t size = 0;
};

struct Dendrogram {
  std::vector<std::string> leaves;  // sorted vids
  std::vector<Merge> merges;        // leaves.size() - 1 entries
};

struct Clustering {
  Dendrogram dendrogram;
  std::map<std::string, int> assignment;  // vid -> cluster 0..k-1, numbered by smallest member vid
};

// Full distance matrix over `vectors`, row/column order as given.
std::vector<std::vector<double>> distance_matrix(const std::vector<TextVector>& vectors);

// Average-linkage agglomerative clustering (unweighted mean pairwise distance
// between clusters). Equal distances are broken by the pair's smallest member
// vids, so the result does not depend on input order. Throws
// Errc::invalid_argument unless 1 <= k <= vectors.size().
Clustering agglomerate(const std::vector<TextVector>& vectors, int k);

struct Medoid {
  std::string vid;
  double mean_distance = 0.0;  // mean distance to the cluster's members (itself included)
};

// Per cluster, the member with minimal mean cosine distance to its cluster;
// ties (within 1e-12) go to the smallest vid.
std::map<int, Medoid> medoids(const std::map<std::string, int>& assignment, const std::vector<TextVector>& vectors);

}  // namespace xnec::cluster
