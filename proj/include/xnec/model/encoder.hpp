#pragma once

#include "xnec/model/layers.hpp"

namespace xnec::model {

struct EncoderConfig {
  int input_height = 32;
  int input_width = 32;
  int pool = 8;         // feature grid is (input / pool) on each axis
  bool foveal = true;   // gate features by the gaze map; false gives the plain backbone
  bool trainable = false;

  int grid_height() const { return input_height / pool; }
  int grid_width() const { return input_width / pool; }
  int cells() const { return grid_height() * grid_width(); }
  bool operator==(const EncoderConfig&) const = default;
};

// Frame encoder: a small convolutional filter bank (smoothed intensity,
// horizontal and vertical edges, centre-surround blobs) followed by ReLU and
// average pooling onto a coarse grid. In foveal mode every grid cell is
// multiplied by its share of the frame's gaze mass times the number of cells,
// so a uniform gaze map leaves the backbone features unchanged and cells
// without gaze are zeroed.
class FovealEncoder {
 public:
  static constexpr int kChannels = 4;

  FovealEncoder() = default;
  explicit FovealEncoder(const EncoderConfig& config);

  const EncoderConfig& config() const { return config_; }

  // Per-cell gate, shape (1, cells). Empty or all-zero gaze gives ones.
  Matrix gate(const Matrix& gaze) const;

  // Frame (any size, intensities in [0,1]) -> features (kChannels, cells).
  // `gaze` may be empty. Throws Errc::invalid_argument when a non-empty gaze
  // map's aspect ratio disagrees with the frame's.
  Matrix encode(const Matrix& image, const Matrix& gaze) const;

  // Backbone features without gating, (kChannels, cells).
  Matrix backbone(const Matrix& image) const;

  // Accumulates backbone gradients for one frame given dL/dfeatures.
  void backward(const Matrix& d_features, const Matrix& image, const Matrix& gaze);

  Conv2d conv;

 private:
  Matrix prepare(const Matrix& image) const;  // resized, flattened (1, H*W)
  Matrix pool(const Matrix& maps) const;

  EncoderConfig config_;
};

}  // namespace xnec::model
