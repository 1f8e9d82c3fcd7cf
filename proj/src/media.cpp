#include "xnec/media.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "xnec/error.hpp"

namespace xnec::media {
namespace {

constexpr char kMagic[8] = {'X', 'N', 'V', 'I', 'D', 'E', 'O', '1'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
bool get(std::istream& in, T& value) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&value), sizeof(T)));
}

}  // namespace

Video read_video(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::corrupt_video, "cannot open video " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw Error(Errc::corrupt_video, "not an xnv video: " + path.string());
  }
  std::uint32_t width = 0, height = 0, count = 0;
  if (!get(in, width) || !get(in, height) || !get(in, count)) {
    throw Error(Errc::corrupt_video, "truncated header: " + path.string());
  }
  if (width == 0 || height == 0 || width > 16384 || height > 16384) {
    throw Error(Errc::corrupt_video, "bad frame size in " + path.string());
  }
  Video video;
  video.width = static_cast<int>(width);
  video.height = static_cast<int>(height);
  video.timestamps.reserve(count);
  video.frames.reserve(count);
  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  for (std::uint32_t i = 0; i < count; ++i) {
    double ts = 0.0;
    std::vector<std::uint8_t> frame(pixels);
    if (!get(in, ts) || !in.read(reinterpret_cast<char*>(frame.data()), static_cast<std::streamsize>(pixels))) {
      throw Error(Errc::corrupt_video, "truncated frame " + std::to_string(i) + " in " + path.string());
    }
    video.timestamps.push_back(ts);
    video.frames.push_back(std::move(frame));
  }
  return video;
}

void write_video(const std::filesystem::path& path, const Video& video) {
  if (video.timestamps.size() != video.frames.size()) {
    throw Error(Errc::invalid_argument, "video: timestamp/frame count mismatch");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out.write(kMagic, 8);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(video.width));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(video.height));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(video.frames.size()));
  const std::size_t pixels = static_cast<std::size_t>(video.width) * video.height;
  for (std::size_t i = 0; i < video.frames.size(); ++i) {
    if (video.frames[i].size() != pixels) throw Error(Errc::invalid_argument, "video: frame size mismatch");
    put<double>(out, video.timestamps[i]);
    out.write(reinterpret_cast<const char*>(video.frames[i].data()), static_cast<std::streamsize>(pixels));
  }
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

double max_frame_gap(std::span<const double> timestamps) {
  double gap = 0.0;
  for (std::size_t i = 1; i < timestamps.size(); ++i) gap = std::max(gap, timestamps[i] - timestamps[i - 1]);
  return gap;
}

double nominal_duration(std::span<const double> timestamps) {
  if (timestamps.empty()) return 0.0;
  if (timestamps.size() == 1) return 0.0;
  std::vector<double> diffs;
  diffs.reserve(timestamps.size() - 1);
  for (std::size_t i = 1; i < timestamps.size(); ++i) diffs.push_back(timestamps[i] - timestamps[i - 1]);
  std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2, diffs.end());
  return timestamps.back() - timestamps.front() + diffs[diffs.size() / 2];
}

Video resample(const Video& video, double rate) {
  const auto& ts = video.timestamps;
  if (ts.empty()) throw Error(Errc::corrupt_video, "video has no frames");
  for (std::size_t i = 1; i < ts.size(); ++i) {
    if (!(ts[i] > ts[i - 1])) throw Error(Errc::corrupt_video, "non-increasing timestamps at frame " + std::to_string(i));
  }
  const double gap = max_frame_gap(ts);
  if (gap > kMaxFrameGap) {
    throw Error(Errc::corrupt_video, "dropped segment: inter-frame gap of " + std::to_string(gap) + " s");
  }
  const double duration = nominal_duration(ts);
  const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(duration * rate + 1e-6)));

  Video out;
  out.width = video.width;
  out.height = video.height;
  out.timestamps.reserve(count);
  out.frames.reserve(count);
  std::size_t cursor = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double target = static_cast<double>(k) / rate;
    const double absolute = ts.front() + target;
    while (cursor + 1 < ts.size() && std::abs(ts[cursor + 1] - absolute) < std::abs(ts[cursor] - absolute)) ++cursor;
    out.timestamps.push_back(target);
    out.frames.push_back(video.frames[cursor]);
  }
  return out;
}

Eigen::MatrixXd to_matrix(const Video& video, std::size_t index) {
  Eigen::MatrixXd m(video.height, video.width);
  const auto& frame = video.frames.at(index);
  for (int r = 0; r < video.height; ++r)
    for (int c = 0; c < video.width; ++c) m(r, c) = frame[static_cast<std::size_t>(r) * video.width + c] / 255.0;
  return m;
}

Eigen::MatrixXd resize_area(const Eigen::MatrixXd& image, int out_rows, int out_cols) {
  if (out_rows <= 0 || out_cols <= 0) throw Error(Errc::invalid_argument, "resize: bad target size");
  if (image.rows() == out_rows && image.cols() == out_cols) return image;
  // Separable: weights[o][i] = overlap of output cell o with input pixel i.
  auto weights = [](Eigen::Index in, int out) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(out, in);
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      const double lo = o * scale, hi = (o + 1) * scale;
      for (auto i = static_cast<Eigen::Index>(std::floor(lo)); i < std::min<Eigen::Index>(in, static_cast<Eigen::Index>(std::ceil(hi))); ++i) {
        const double overlap = std::min<double>(hi, i + 1) - std::max<double>(lo, i);
        if (overlap > 0) w(o, i) = overlap / scale;
      }
    }
    return w;
  };
  const Eigen::MatrixXd rows = weights(image.rows(), out_rows);
  const Eigen::MatrixXd cols = weights(image.cols(), out_cols);
  return rows * image * cols.transpose();
}

}  // namespace xnec::media
