#include <doctest.h>

#include <fstream>

#include "support.hpp"
#include "xnec/corpus.hpp"
#include "xnec/error.hpp"

using namespace xnec;
using corpus::ClipRecord;

namespace {

void write_raw_clip(const std::filesystem::path& dir, const std::string& vid, int frames, double fps) {
  media::Video v;
  v.width = 8;
  v.height = 6;
  for (int i = 0; i < frames; ++i) {
    v.timestamps.push_back(i / fps);
    v.frames.emplace_back(48, static_cast<std::uint8_t>(i));
  }
  media::write_video(dir / (vid + ".xnv"), v);
  media::write_video(dir / (vid + ".gaze.xnv"), v);
}

ClipRecord labeled_clip(const std::string& vid, std::size_t frames, double score, double start, double end) {
  ClipRecord c;
  c.vid = vid;
  c.video_path = "media/" + vid + ".xnv";
  c.speed.assign(frames, 10.0);
  c.course.assign(frames, 90.0);
  c.necessity_score = score;
  c.explanation_interval = corpus::Interval{start, end};
  c.message = "braking for a pedestrian";
  return c;
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("telemetry interpolation holds endpoints and interpolates inside") {
    const std::vector<corpus::TelemetrySample> s = {{0.0, 10.0, 350.0}, {1.0, 12.0, 10.0}};
    const auto speed = corpus::interpolate_speed(s, {-1.0, 0.0, 0.5, 1.0, 3.0});
    CHECK(speed == std::vector<double>{10.0, 10.0, 11.0, 12.0, 12.0});
    // heading crosses north: 350 -> 10 passes through 0, not 180
    const auto course = corpus::interpolate_course(s, {0.5});
    CHECK(course[0] == doctest::Approx(0.0).epsilon(1e-12));
  }

  TEST_CASE("ingest resamples to 10 Hz and aligns telemetry") {
    test::TempDir dir("corpus");
    write_raw_clip(dir.path(), "c1", 150, 30.0);
    corpus::IngestRequest req{"c1", dir / "c1.xnv", dir / "c1.gaze.xnv", {{0.0, 5.0, 0.0}, {5.0, 15.0, 0.0}}};
    const auto clip = corpus::ingest_clip(req, dir / "corpus");
    CHECK(clip.frame_count() == 50);
    CHECK(clip.speed[10] == doctest::Approx(7.0));  // t = 1.0 s
    CHECK_FALSE(clip.labeled());
    const auto video = media::read_video(dir / "corpus" / clip.video_path);
    CHECK(video.frame_count() == 50);
    CHECK(std::filesystem::exists(dir / "corpus" / clip.gazemap_path));
  }

  TEST_CASE("ingest rejects empty telemetry and corrupt video") {
    test::TempDir dir("corpus");
    write_raw_clip(dir.path(), "c1", 30, 30.0);
    corpus::IngestRequest req{"c1", dir / "c1.xnv", {}, {}};
    try {
      corpus::ingest_clip(req, dir / "corpus");
      FAIL("expected empty-telemetry");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::empty_telemetry);
    }
    media::Video v = media::read_video(dir / "c1.xnv");
    for (std::size_t i = 15; i < v.timestamps.size(); ++i) v.timestamps[i] += 1.0;
    media::write_video(dir / "gap.xnv", v);
    corpus::IngestRequest gap{"gap", dir / "gap.xnv", {}, {{0.0, 1.0, 0.0}}};
    try {
      corpus::ingest_clip(gap, dir / "corpus");
      FAIL("expected corrupt-video");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::corrupt_video);
    }
  }

  TEST_CASE("manifest round trip and version check") {
    test::TempDir dir("corpus");
    corpus::Corpus c;
    c.root = dir.path();
    c.clips.push_back(labeled_clip("a", 100, 0.8, 4.0, 4.5));
    ClipRecord unlabeled = labeled_clip("b", 60, 0.0, 0.0, 0.0);
    unlabeled.necessity_score.reset();
    unlabeled.explanation_interval.reset();
    unlabeled.message.reset();
    c.clips.push_back(unlabeled);
    corpus::save_manifest(c, dir / "manifest.json");
    const auto back = corpus::load_manifest(dir / "manifest.json");
    REQUIRE(back.clips.size() == 2);
    CHECK(back.clips[0] == c.clips[0]);
    CHECK(back.clips[1] == c.clips[1]);

    std::string text = test::slurp(dir / "manifest.json");
    const auto at = text.find("\"version\": 1");
    REQUIRE(at != std::string::npos);
    text.replace(at, 12, "\"version\": 2");
    test::spit(dir / "v2.json", text);
    try {
      corpus::load_manifest(dir / "v2.json");
      FAIL("expected version mismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::version_mismatch);
    }
  }

  TEST_CASE("manifest saved elsewhere keeps media reachable") {
    test::TempDir dir("corpus");
    corpus::Corpus c;
    c.root = dir / "a";
    c.clips.push_back(labeled_clip("x", 50, 0.5, 1.0, 2.0));
    corpus::save_manifest(c, dir / "b" / "deep" / "m.json");
    const auto back = corpus::load_manifest(dir / "b" / "deep" / "m.json");
    CHECK(std::filesystem::weakly_canonical(back.resolve(back.clips[0].video_path)) ==
          std::filesystem::weakly_canonical(dir / "a" / "media" / "x.xnv"));
  }

  TEST_CASE("validation names the offending field") {
    auto c = labeled_clip("a", 50, 1.2, 1.0, 2.0);
    try {
      corpus::validate(c);
      FAIL("expected validation error");
    } catch (const Error& e) {
      CHECK(e.field() == "necessity_score");
    }
    c = labeled_clip("a", 50, 0.5, 3.0, 2.0);
    CHECK_THROWS_AS(corpus::validate(c), Error);
    c = labeled_clip("a", 50, 0.5, 1.0, 9.0);  // past the 5 s clip
    CHECK_THROWS_AS(corpus::validate(c), Error);
  }

  TEST_CASE("filter drops flagged clips and lists unknown ids") {
    std::vector<ClipRecord> clips = {labeled_clip("a", 50, 0.5, 1, 2), labeled_clip("b", 50, 0.5, 1, 2),
                                     labeled_clip("c", 50, 0.5, 1, 2)};
    const std::vector<corpus::FlagEntry> flags = {{"b", corpus::Violation::unsafe_action},
                                                  {"b", corpus::Violation::corrupt_video},
                                                  {"b", corpus::Violation::unsafe_action}};
    const auto r = corpus::filter_corpus(clips, flags);
    REQUIRE(r.kept.size() == 2);
    CHECK(r.kept[0].vid == "a");
    CHECK(r.kept[1].vid == "c");
    REQUIRE(r.reports.size() == 3);
    CHECK_FALSE(r.reports[1].passed);
    CHECK(r.reports[1].violated_assumptions.size() == 2);

    const std::vector<corpus::FlagEntry> bad = {{"zz", corpus::Violation::unsafe_action},
                                                {"yy", corpus::Violation::unsafe_action}};
    try {
      corpus::filter_corpus(clips, bad);
      FAIL("expected unknown id");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::unknown_id);
      CHECK(std::string(e.what()).find("yy, zz") != std::string::npos);
    }
  }

  TEST_CASE("violation codes round trip") {
    for (auto v : {corpus::Violation::traffic_law_violation, corpus::Violation::unsafe_action,
                   corpus::Violation::no_explanation_moment, corpus::Violation::corrupt_video}) {
      CHECK(corpus::parse_violation(corpus::to_string(v)) == v);
    }
    CHECK_THROWS_AS(corpus::parse_violation("speeding"), Error);
  }
}
