#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace xnec::media {

// Grayscale frame-addressable clip. Each frame carries its container
// timestamp so dropped segments are detectable after the fact.
//
// On-disk layout (little endian), extension ".xnv":
//   char[8]  magic "XNVIDEO1"
//   uint32   width, height, frame_count
//   frame_count x { float64 timestamp_seconds; uint8 pixels[width*height] }
struct Video {
  int width = 0;
  int height = 0;
  std::vector<double> timestamps;
  std::vector<std::vector<std::uint8_t>> frames;

  std::size_t frame_count() const { return frames.size(); }
};

Video read_video(const std::filesystem::path& path);
void write_video(const std::filesystem::path& path, const Video& video);

inline constexpr double kFrameRate = 10.0;
inline constexpr double kFramePeriod = 0.1;
// Any inter-frame gap above this marks the clip as corrupt (skipped frames).
inline constexpr double kMaxFrameGap = 0.5;

// Largest gap between consecutive container timestamps (0 for < 2 frames).
double max_frame_gap(std::span<const double> timestamps);

// Nominal duration: last timestamp minus first plus one median frame period.
double nominal_duration(std::span<const double> timestamps);

// Nearest-timestamp resampling onto t = k / rate, k = 0 .. floor(duration * rate).
// Timestamps are rebased to start at zero. Resampling a clip already at `rate`
// returns it unchanged. Throws Errc::corrupt_video on gaps, non-monotone
// timestamps or an empty clip.
Video resample(const Video& video, double rate = kFrameRate);

// Frame as intensities in [0, 1], rows = height.
Eigen::MatrixXd to_matrix(const Video& video, std::size_t index);

// Box-filter (area) resize; handles fractional pixel overlap.
Eigen::MatrixXd resize_area(const Eigen::MatrixXd& image, int out_rows, int out_cols);

}  // namespace xnec::media
