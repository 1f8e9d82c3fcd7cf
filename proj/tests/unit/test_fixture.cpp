#include <doctest.h>

#include <algorithm>

#include "support.hpp"
#include "xnec/aggregate.hpp"
#include "xnec/fixture.hpp"

using namespace xnec;
namespace fs = std::filesystem;

namespace {

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_SUITE("fixture") {
  TEST_CASE("generation is byte-for-byte deterministic") {
    test::TempDir a("fixa"), b("fixb");
    fixture::Options o;
    o.clips = 6;
    o.seed = 21;
    fixture::generate(a.path(), o);
    fixture::generate(b.path(), o);
    const auto fa = files_under(a.path());
    REQUIRE(fa == files_under(b.path()));
    CHECK(fa.size() >= 6 * 3 + 5);
    for (const auto& f : fa) {
      INFO(f.string());
      CHECK(test::slurp(a.path() / f) == test::slurp(b.path() / f));
    }
    o.seed = 22;
    test::TempDir c("fixc");
    fixture::generate(c.path(), o);
    CHECK(test::slurp(a.path() / "annotations.csv") != test::slurp(c.path() / "annotations.csv"));
  }

  TEST_CASE("planted annotations separate hazards from distractors") {
    test::TempDir dir("fixlabels");
    fixture::Options o;
    o.clips = 12;
    o.seed = 3;
    const auto s = fixture::generate(dir.path(), o);
    REQUIRE(s.clips.size() == 12);
    const auto result = aggregate::aggregate_all(aggregate::read_annotations(s.annotations_csv));
    for (const auto& clip : s.clips) {
      const auto it = result.labels.find(clip.vid);
      REQUIRE(it != result.labels.end());
      INFO(clip.vid);
      const double score = it->second.necessity_score;
      if (clip.kind == fixture::Kind::hazard) CHECK(score >= 0.7);
      if (clip.kind == fixture::Kind::distractor) CHECK(score <= 0.45);
      CHECK(it->second.interval.start >= clip.event_time);
    }
  }
}
