#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xnec/media.hpp"

namespace xnec::corpus {

struct Interval {
  double start = 0.0;
  double end = 0.0;

  bool contains(double t) const { return start <= t && t <= end; }
  bool operator==(const Interval&) const = default;
};

// One clip of the necessity corpus. Media paths are stored relative to the
// manifest directory; series are sampled at media::kFrameRate.
struct ClipRecord {
  std::string vid;
  std::string video_path;
  std::string gazemap_path;  // empty: no recorded gaze, encoder falls back to uniform
  std::vector<double> speed;   // m/s per frame
  std::vector<double> course;  // heading in degrees per frame
  std::optional<std::string> message;
  std::optional<double> necessity_score;
  std::optional<Interval> explanation_interval;

  std::size_t frame_count() const { return speed.size(); }
  double duration() const { return static_cast<double>(frame_count()) * media::kFramePeriod; }
  bool labeled() const { return necessity_score.has_value(); }

  bool operator==(const ClipRecord&) const = default;
};

struct Corpus {
  std::vector<ClipRecord> clips;
  std::filesystem::path root;  // directory that media paths are relative to

  const ClipRecord& find(const std::string& vid) const;
  std::filesystem::path resolve(const std::string& relative) const;
};

// Throws Errc::validation naming the field on the first violated invariant.
void validate(const ClipRecord& clip);

enum class Violation { traffic_law_violation, unsafe_action, no_explanation_moment, corrupt_video };

const char* to_string(Violation v);
Violation parse_violation(const std::string& code);

struct AssumptionReport {
  std::string vid;
  bool passed = true;
  std::vector<Violation> violated_assumptions;
};

struct TelemetrySample {
  double timestamp = 0.0;
  double speed = 0.0;
  double course = 0.0;
};

// CSV with header `timestamp,speed,course`; rows are sorted by timestamp.
std::vector<TelemetrySample> read_telemetry(const std::filesystem::path& path);

// Linear interpolation of speed onto `times`; values outside the sample range
// hold the nearest endpoint.
std::vector<double> interpolate_speed(const std::vector<TelemetrySample>& samples, const std::vector<double>& times);
// Same, on the unwrapped heading; result wrapped to [0, 360).
std::vector<double> interpolate_course(const std::vector<TelemetrySample>& samples, const std::vector<double>& times);

struct IngestRequest {
  std::string vid;
  std::filesystem::path video;
  std::filesystem::path gaze;  // optional
  std::vector<TelemetrySample> telemetry;
};

// Resamples video (and gaze) to 10 Hz, writes them under
// `corpus_dir/media/`, and interpolates telemetry onto frame timestamps.
// Labels are left unset. Throws Errc::corrupt_video or Errc::empty_telemetry.
ClipRecord ingest_clip(const IngestRequest& request, const std::filesystem::path& corpus_dir);

struct FlagEntry {
  std::string vid;
  Violation violation;
};

std::vector<FlagEntry> read_flags(const std::filesystem::path& path);

struct FilterResult {
  std::vector<ClipRecord> kept;
  std::vector<AssumptionReport> reports;  // one per input clip, input order
};

// Drops every clip with at least one flag. Flags naming a vid not in `clips`
// raise Errc::unknown_id listing all such ids.
FilterResult filter_corpus(const std::vector<ClipRecord>& clips, const std::vector<FlagEntry>& flags);

inline constexpr int kManifestVersion = 1;

void save_manifest(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_manifest(const std::filesystem::path& path);

}  // namespace xnec::corpus
