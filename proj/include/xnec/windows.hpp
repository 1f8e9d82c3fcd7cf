#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xnec/corpus.hpp"
#include "xnec/random.hpp"

namespace xnec::windows {

// Frames per window: four seconds at 10 Hz.
inline constexpr int kWindowFrames = 40;
// Earliest end frame with a full history (frame 39, t = 3.9 s).
inline constexpr int kMinEndFrame = kWindowFrames - 1;

// Frames [end_frame - 39, end_frame] of one clip; frame e sits at t = e / 10 s.
struct FrameWindow {
  std::string vid;
  int end_frame = 0;
  int label = 0;
  double acceleration = 0.0;  // m/s^2 at the end frame
  double score = 0.0;         // the clip's necessity score

  int first_frame() const { return end_frame - (kWindowFrames - 1); }
  double end_time() const { return end_frame * media::kFramePeriod; }
  bool operator==(const FrameWindow&) const = default;
};

struct LabelingPolicy {
  double p0 = 0.5;
  int negatives_per_clip = 1;
  std::uint64_t seed = 0;
};

// Backward difference of speed over one frame period at `frame` (>= 1).
double acceleration_at(const corpus::ClipRecord& clip, int frame);

struct PositiveWindows {
  std::vector<FrameWindow> windows;
  std::optional<std::string> warning;  // set when the interval ends before a full window fits
};

// One window per frame whose time lies in the closed explanation interval,
// provided the clip's score reaches p0. Throws Errc::invalid_argument for
// unlabeled clips.
PositiveWindows positive_windows(const corpus::ClipRecord& clip, const LabelingPolicy& policy);

// `negatives_per_clip` windows with uniformly random end frames, drawn from a
// stream keyed by (seed, vid). Requires a labeled clip scoring below p0;
// throws Errc::too_short for clips under 40 frames.
std::vector<FrameWindow> negative_windows(const corpus::ClipRecord& clip, const LabelingPolicy& policy);
FrameWindow negative_window(const corpus::ClipRecord& clip, const LabelingPolicy& policy);

// Inverse class frequency weights, normalised to sum to one. Throws
// Errc::invalid_argument unless both classes are present.
std::vector<double> class_weights(std::span<const FrameWindow> windows);
std::vector<double> class_weights(std::span<const int> labels);

struct WindowSet {
  std::vector<FrameWindow> windows;
  std::vector<std::string> warnings;
};

// Positives from clips at or above p0, negatives from the rest. Unlabeled
// clips are skipped.
WindowSet extract(std::span<const corpus::ClipRecord> clips, const LabelingPolicy& policy);

// Re-derives a window's label from the clip alone.
bool label_consistent(const FrameWindow& window, const corpus::ClipRecord& clip, double p0);

// CSV `vid,end_frame,label,weight,score`.
void write_index(std::ostream& out, std::span<const FrameWindow> windows, std::span<const double> weights);
std::vector<FrameWindow> read_index(const std::filesystem::path& path);

// Index in [0, bound) from the stream; rejection sampling keeps it unbiased
// and specified independently of the standard library.
std::uint64_t uniform_index(Rng& rng, std::uint64_t bound);

}  // namespace xnec::windows
