#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace xnec::fixture {

// hazard: a bright object appears where the driver then looks (explanation
// needed). distractor: an equally bright object appears away from the gaze
// (no explanation needed). moderate: a hazard with mid-range scores.
enum class Kind { hazard, distractor, moderate };
const char* to_string(Kind kind);

struct Options {
  int clips = 12;
  std::uint64_t seed = 0;
  int width = 48;
  int height = 48;
  double fps = 30.0;
  double duration = 10.0;
  int annotators = 5;
  double flagged_fraction = 0.1;
  int participants = 18;
  int study_videos = 6;
};

struct PlantedClip {
  std::string vid;
  Kind kind = Kind::hazard;
  std::string scenario;
  double event_time = 0.0;
  int object_x = 0, object_y = 0;
  bool flagged = false;
};

struct Summary {
  std::filesystem::path dir;
  std::vector<PlantedClip> clips;
  std::filesystem::path clips_csv;        // vid,video,gaze,telemetry (relative to dir)
  std::filesystem::path flags_csv;        // vid,violation
  std::filesystem::path annotations_csv;  // vid,annotator_id,moment,score,explanation
  std::filesystem::path ratings_csv;
  std::filesystem::path participants_csv;
  std::vector<std::string> annotators;
};

// Renders a synthetic corpus: raw 30 fps grayscale clips with gaze maps and
// 5 Hz telemetry, annotator events, flags, and a passenger-study response
// set. Deterministic in (options).
Summary generate(const std::filesystem::path& dir, const Options& options);

}  // namespace xnec::fixture
