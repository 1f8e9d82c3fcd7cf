#include <doctest.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <set>

#include "support.hpp"
#include "xnec/error.hpp"
#include "xnec/windows.hpp"

using namespace xnec;
using corpus::ClipRecord;
using windows::LabelingPolicy;

namespace {

ClipRecord clip(const std::string& vid, double score, double start, double end, std::size_t frames = 100) {
  ClipRecord c;
  c.vid = vid;
  c.video_path = "v";
  for (std::size_t i = 0; i < frames; ++i) c.speed.push_back(10.0 + 0.05 * static_cast<double>(i * i % 17));
  c.course.assign(frames, 0.0);
  c.necessity_score = score;
  c.explanation_interval = corpus::Interval{start, end};
  return c;
}

}  // namespace

TEST_SUITE("windows") {
  TEST_CASE("interval 4.0-4.5 s gives end frames 40..45") {
    const auto p = windows::positive_windows(clip("a", 0.8, 4.0, 4.5), {0.5, 1, 0});
    REQUIRE(p.windows.size() == 6);
    for (int i = 0; i < 6; ++i) {
      CHECK(p.windows[i].end_frame == 40 + i);
      CHECK(p.windows[i].first_frame() == 1 + i);
      CHECK(p.windows[i].label == 1);
    }
    CHECK_FALSE(p.warning);
  }

  TEST_CASE("frame 39 is the first with full history; earlier intervals warn") {
    const auto p = windows::positive_windows(clip("a", 0.8, 3.5, 4.0), {0.5, 1, 0});
    REQUIRE(p.windows.size() == 2);
    CHECK(p.windows.front().end_frame == 39);
    const auto early = windows::positive_windows(clip("b", 0.8, 1.0, 2.0), {0.5, 1, 0});
    CHECK(early.windows.empty());
    CHECK(early.warning);
  }

  TEST_CASE("score below p0 gives no positives; score equal to p0 does") {
    CHECK(windows::positive_windows(clip("a", 0.49, 4.0, 4.5), {0.5, 1, 0}).windows.empty());
    CHECK(windows::positive_windows(clip("a", 0.5, 4.0, 4.5), {0.5, 1, 0}).windows.size() == 6);
  }

  TEST_CASE("acceleration is the backward speed difference over 0.1 s") {
    const auto c = clip("a", 0.8, 4.0, 4.0);
    const auto w = windows::positive_windows(c, {0.5, 1, 0}).windows.at(0);
    CHECK(w.acceleration == doctest::Approx((c.speed[40] - c.speed[39]) / 0.1));
    CHECK_THROWS_AS(windows::acceleration_at(c, 0), Error);
  }

  TEST_CASE("negatives cover every admissible end frame and are seed-stable") {
    const auto c = clip("neg", 0.2, 1.0, 2.0);
    std::set<int> seen;
    for (std::uint64_t seed = 0; seed < 3000; ++seed) {
      const auto w = windows::negative_window(c, {0.5, 1, seed});
      CHECK(w.end_frame >= 39);
      CHECK(w.end_frame <= 99);
      CHECK(w.label == 0);
      seen.insert(w.end_frame);
    }
    CHECK(seen.size() == 61);
    CHECK(windows::negative_window(c, {0.5, 1, 42}) == windows::negative_window(c, {0.5, 1, 42}));
    CHECK_THROWS_AS(windows::negative_window(clip("hi", 0.7, 1, 2), {0.5, 1, 0}), Error);
  }

  TEST_CASE("short clips cannot yield a negative") {
    try {
      windows::negative_window(clip("s", 0.1, 0.5, 1.0, 30), {0.5, 1, 0});
      FAIL("expected too-short");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::too_short);
    }
    const std::vector<ClipRecord> clips = {clip("s", 0.1, 0.5, 1.0, 30)};
    const auto set = windows::extract(clips, {0.5, 1, 0});
    CHECK(set.windows.empty());
    CHECK(set.warnings.size() == 1);
  }

  TEST_CASE("class weights balance the classes") {
    const std::vector<int> labels = {1, 1, 1, 0};
    const auto w = windows::class_weights(labels);
    CHECK(w[0] == doctest::Approx(1.0 / 6));
    CHECK(w[3] == doctest::Approx(0.5));
    CHECK_THROWS_AS(windows::class_weights(std::vector<int>{1, 1}), Error);
  }

  TEST_CASE("every extracted window is label-consistent; positives shrink as p0 rises") {
    std::vector<ClipRecord> clips;
    Rng rng = make_rng(8);
    for (int i = 0; i < 60; ++i) {
      const double s = uniform01(rng);
      const double a = 2.0 + 6.0 * uniform01(rng);
      clips.push_back(clip("c" + std::to_string(i), s, a, a + uniform01(rng)));
    }
    std::size_t previous = SIZE_MAX;
    for (double p0 : {0.5, 0.6, 0.7}) {
      const auto set = windows::extract(clips, {p0, 1, 3});
      std::size_t pos = 0;
      for (const auto& w : set.windows) {
        const auto& c = *std::find_if(clips.begin(), clips.end(), [&](const auto& x) { return x.vid == w.vid; });
        CHECK(windows::label_consistent(w, c, p0));
        pos += w.label;
      }
      CHECK(pos <= previous);
      previous = pos;
    }
  }

  TEST_CASE("index file round trip") {
    test::TempDir dir("windows");
    const std::vector<ClipRecord> clips = {clip("a", 0.8, 4.0, 4.3), clip("b", 0.1, 1, 2)};
    const auto set = windows::extract(clips, {0.5, 2, 9});
    const auto weights = windows::class_weights(set.windows);
    {
      std::ofstream out(dir / "idx.csv");
      windows::write_index(out, set.windows, weights);
    }
    const auto back = windows::read_index(dir / "idx.csv");
    REQUIRE(back.size() == set.windows.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].vid == set.windows[i].vid);
      CHECK(back[i].end_frame == set.windows[i].end_frame);
      CHECK(back[i].label == set.windows[i].label);
    }
  }

  TEST_CASE("uniform_index is unbiased enough and in range") {
    Rng rng = make_rng(1);
    std::array<int, 7> counts{};
    for (int i = 0; i < 70000; ++i) ++counts[windows::uniform_index(rng, 7)];
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  }
}
