#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "xnec/cluster.hpp"
#include "xnec/error.hpp"
#include "xnec/random.hpp"

using namespace xnec;

namespace {

const char* kWords[] = {"brake", "car", "lane", "pedestrian", "light", "red", "stop", "cyclist", "merge", "slow"};

std::map<std::string, std::string> random_messages(Rng& rng, int n) {
  std::map<std::string, std::string> m;
  for (int i = 0; i < n; ++i) {
    std::string text;
    const int len = 1 + static_cast<int>(rng() % 5);
    for (int w = 0; w < len; ++w) text += std::string(kWords[rng() % 10]) + " ";
    char id[16];
    std::snprintf(id, sizeof id, "v%03d", i);
    m[id] = text;
  }
  return m;
}

// O(n^3) naive average linkage over explicit member lists; ties broken by the
// clusters' smallest member index, mirroring the library's convention.
std::vector<double> naive_merge_heights(const std::vector<std::vector<double>>& d) {
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < d.size(); ++i) clusters.push_back({i});
  std::vector<double> heights;
  while (clusters.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i)
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        double s = 0.0;
        for (auto a : clusters[i])
          for (auto b : clusters[j]) s += d[a][b];
        s /= static_cast<double>(clusters[i].size() * clusters[j].size());
        if (s < best - 1e-12) best = s, bi = i, bj = j;
      }
    heights.push_back(best);
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  return heights;
}

}  // namespace

TEST_SUITE("cluster") {
  TEST_CASE("tokenizer lowercases and splits on non-alphanumerics") {
    CHECK(cluster::tokenize("Brake! The car's LANE-change 2x") ==
          std::vector<std::string>{"brake", "the", "car", "s", "lane", "change", "2x"});
    CHECK(cluster::tokenize("  ,,  ").empty());
  }

  TEST_CASE("smoothed idf") {
    CHECK(cluster::smoothed_idf(4, 4) == 1.0);
    CHECK(cluster::smoothed_idf(4, 1) == doctest::Approx(std::log(5.0 / 2.0) + 1.0));
  }

  TEST_CASE("tf-idf vectors are unit length and cosine behaves") {
    const std::map<std::string, std::string> m = {{"a", "brake for pedestrian"}, {"b", "brake for pedestrian"},
                                                  {"c", "green light ahead"}, {"d", ""}};
    const auto v = cluster::vectorize(m);
    REQUIRE(v.size() == 4);
    for (int i = 0; i < 3; ++i) {
      double norm = 0;
      for (const auto& [t, w] : v[i].weights) norm += w * w;
      CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(cluster::cosine_distance(v[0], v[1]) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cluster::cosine_distance(v[0], v[2]) == 1.0);
    CHECK(v[3].empty);
    CHECK(cluster::cosine_distance(v[3], v[3]) == 1.0);
  }

  TEST_CASE("merge heights match a naive average-linkage oracle") {
    Rng rng = make_rng(5);
    for (int trial = 0; trial < 30; ++trial) {
      const auto vectors = cluster::vectorize(random_messages(rng, 4 + trial % 9));
      const auto d = cluster::distance_matrix(vectors);
      const auto result = cluster::agglomerate(vectors, 1);
      const auto expected = naive_merge_heights(d);
      REQUIRE(result.dendrogram.merges.size() == expected.size());
      for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(result.dendrogram.merges[i].distance == doctest::Approx(expected[i]).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("k clusters, deterministic numbering, bad k rejected") {
    Rng rng = make_rng(9);
    const auto vectors = cluster::vectorize(random_messages(rng, 12));
    for (int k = 1; k <= 12; ++k) {
      const auto c = cluster::agglomerate(vectors, k);
      std::set<int> ids;
      for (const auto& [vid, id] : c.assignment) ids.insert(id);
      CHECK(static_cast<int>(ids.size()) == k);
      CHECK(*ids.rbegin() == k - 1);
      CHECK(c.assignment.at("v000") == 0);
    }
    CHECK_THROWS_AS(cluster::agglomerate(vectors, 0), Error);
    CHECK_THROWS_AS(cluster::agglomerate(vectors, 13), Error);
  }

  TEST_CASE("medoid of a singleton is itself, ties go to the smallest vid") {
    const std::map<std::string, std::string> m = {{"b", "stop now"}, {"a", "stop now"}, {"c", "green light"}};
    const auto v = cluster::vectorize(m);
    const auto c = cluster::agglomerate(v, 2);
    const auto med = cluster::medoids(c.assignment, v);
    REQUIRE(med.size() == 2);
    CHECK(med.at(c.assignment.at("a")).vid == "a");
    CHECK(med.at(c.assignment.at("c")).vid == "c");
    CHECK(med.at(c.assignment.at("c")).mean_distance == 0.0);
  }
}
