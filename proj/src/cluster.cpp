#include "xnec/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "xnec/error.hpp"

namespace xnec::cluster {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

double smoothed_idf(std::size_t n_docs, std::size_t document_frequency) {
  return std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(document_frequency))) + 1.0;
}

std::vector<TextVector> vectorize(const std::map<std::string, std::string>& messages) {
  if (messages.empty()) throw Error(Errc::invalid_argument, "vectorize: empty corpus");
  std::vector<std::map<std::string, double>> counts;
  std::map<std::string, std::size_t> df;
  for (const auto& [vid, text] : messages) {
    std::map<std::string, double> tf;
    for (auto& token : tokenize(text)) tf[token] += 1.0;
    for (const auto& [term, _] : tf) ++df[term];
    counts.push_back(std::move(tf));
  }
  std::vector<TextVector> out;
  std::size_t i = 0;
  for (const auto& [vid, text] : messages) {
    TextVector v{vid, std::move(counts[i++]), false};
    double norm2 = 0.0;
    for (auto& [term, w] : v.weights) {
      w *= smoothed_idf(messages.size(), df[term]);
      norm2 += w * w;
    }
    if (norm2 == 0.0) {
      v.empty = true;
    } else {
      const double norm = std::sqrt(norm2);
      for (auto& [term, w] : v.weights) w /= norm;
    }
    out.push_back(std::move(v));
  }
  return out;
}

double cosine_distance(const TextVector& a, const TextVector& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [_, w] : a.weights) na += w * w;
  for (const auto& [_, w] : b.weights) nb += w * w;
  if (na == 0.0 || nb == 0.0) return 1.0;
  const auto& small = a.weights.size() <= b.weights.size() ? a.weights : b.weights;
  const auto& large = a.weights.size() <= b.weights.size() ? b.weights : a.weights;
  for (const auto& [term, w] : small) {
    auto it = large.find(term);
    if (it != large.end()) dot += w * it->second;
  }
  return std::clamp(1.0 - dot / std::sqrt(na * nb), 0.0, 1.0);
}

std::vector<std::vector<double>> distance_matrix(const std::vector<TextVector>& vectors) {
  const std::size_t n = vectors.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) d[i][j] = d[j][i] = cosine_distance(vectors[i], vectors[j]);
    if (vectors[i].empty) d[i][i] = 1.0;
  }
  return d;
}

Clustering agglomerate(const std::vector<TextVector>& vectors, int k) {
  const std::size_t n = vectors.size();
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw Error(Errc::invalid_argument, "k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]", "k");
  }
  std::vector<TextVector> sorted = vectors;
  std::sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) { return x.vid < y.vid; });
  for (std::size_t i = 1; i < n; ++i) {
    if (sorted[i].vid == sorted[i - 1].vid) throw Error(Errc::invalid_argument, "duplicate vid " + sorted[i].vid, "vid");
  }

  Clustering result;
  for (const auto& v : sorted) result.dendrogram.leaves.push_back(v.vid);

  // Active clusters are slots 0..n-1; slot i keeps the smallest leaf it has
  // absorbed, which is also its smallest vid since leaves are sorted.
  auto dist = distance_matrix(sorted);
  std::vector<bool> active(n, true);
  std::vector<std::size_t> node(n), size(n, 1);
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) {
    node[i] = i;
    members[i] = {i};
  }

  std::vector<std::vector<std::size_t>> snapshot;  // membership when k clusters remain
  auto take_snapshot = [&] {
    snapshot.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (active[i]) snapshot.push_back(members[i]);
  };
  if (static_cast<std::size_t>(k) == n) take_snapshot();

  for (std::size_t step = 0; step + 1 < n; ++step) {
    // Scan in slot order: the first strict minimum wins, so equal distances
    // resolve to the lexicographically smallest (min vid, min vid) pair.
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        if (dist[i][j] < best) {
          best = dist[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    result.dendrogram.merges.push_back({std::min(node[bi], node[bj]), std::max(node[bi], node[bj]), best,
                                        size[bi] + size[bj]});
    // Lance-Williams update for unweighted average linkage.
    for (std::size_t m = 0; m < n; ++m) {
      if (!active[m] || m == bi || m == bj) continue;
      const double d = (static_cast<double>(size[bi]) * dist[bi][m] + static_cast<double>(size[bj]) * dist[bj][m]) /
                       static_cast<double>(size[bi] + size[bj]);
      dist[bi][m] = dist[m][bi] = d;
    }
    size[bi] += size[bj];
    members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
    members[bj].clear();
    active[bj] = false;
    node[bi] = n + step;
    if (n - (step + 1) == static_cast<std::size_t>(k)) take_snapshot();
  }

  // Snapshot is already ordered by smallest member (slot order).
  for (std::size_t c = 0; c < snapshot.size(); ++c)
    for (auto leaf : snapshot[c]) result.assignment[sorted[leaf].vid] = static_cast<int>(c);
  return result;
}

std::map<int, Medoid> medoids(const std::map<std::string, int>& assignment, const std::vector<TextVector>& vectors) {
  std::unordered_map<std::string, const TextVector*> by_vid;
  for (const auto& v : vectors) by_vid[v.vid] = &v;
  std::map<int, std::vector<const TextVector*>> clusters;  // members in vid order
  for (const auto& [vid, c] : assignment) {
    auto it = by_vid.find(vid);
    if (it == by_vid.end()) throw Error(Errc::unknown_id, "no vector for vid " + vid, "vid");
    clusters[c].push_back(it->second);
  }
  std::map<int, Medoid> out;
  for (const auto& [c, members] : clusters) {
    Medoid best{"", std::numeric_limits<double>::infinity()};
    for (const auto* candidate : members) {
      double sum = 0.0;
      for (const auto* other : members) sum += candidate == other ? 0.0 : cosine_distance(*candidate, *other);
      const double mean = sum / static_cast<double>(members.size());
      if (mean < best.mean_distance - 1e-12) best = {candidate->vid, mean};
    }
    out[c] = best;
  }
  return out;
}

}  // namespace xnec::cluster
