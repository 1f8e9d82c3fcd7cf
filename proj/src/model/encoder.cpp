#include "xnec/model/encoder.hpp"

#include <cmath>

#include "xnec/error.hpp"
#include "xnec/media.hpp"

namespace xnec::model {

FovealEncoder::FovealEncoder(const EncoderConfig& config) : config_(config) {
  if (config.pool <= 0 || config.input_height % config.pool || config.input_width % config.pool) {
    throw Error(Errc::invalid_argument, "encoder: input size must be a multiple of the pool size");
  }
  Rng unused(0);
  conv = Conv2d("encoder.conv", 1, kChannels, 3, true, unused);
  const double bank[kChannels][9] = {
      {1 / 16.0, 2 / 16.0, 1 / 16.0, 2 / 16.0, 4 / 16.0, 2 / 16.0, 1 / 16.0, 2 / 16.0, 1 / 16.0},
      {-1 / 4.0, 0, 1 / 4.0, -2 / 4.0, 0, 2 / 4.0, -1 / 4.0, 0, 1 / 4.0},
      {-1 / 4.0, -2 / 4.0, -1 / 4.0, 0, 0, 0, 1 / 4.0, 2 / 4.0, 1 / 4.0},
      {-1 / 8.0, -1 / 8.0, -1 / 8.0, -1 / 8.0, 1.0, -1 / 8.0, -1 / 8.0, -1 / 8.0, -1 / 8.0},
  };
  for (int c = 0; c < kChannels; ++c)
    for (int i = 0; i < 9; ++i) conv.weight.value(c, i) = bank[c][i];
  conv.bias.value.setZero();
}

Matrix FovealEncoder::prepare(const Matrix& image) const {
  const Matrix resized = media::resize_area(image, config_.input_height, config_.input_width);
  Matrix flat(1, resized.size());
  for (int y = 0; y < config_.input_height; ++y)
    for (int x = 0; x < config_.input_width; ++x) flat(0, y * config_.input_width + x) = resized(y, x);
  return flat;
}

Matrix FovealEncoder::pool(const Matrix& maps) const {
  const int gh = config_.grid_height(), gw = config_.grid_width(), p = config_.pool, w = config_.input_width;
  Matrix out = Matrix::Zero(maps.rows(), gh * gw);
  const double scale = 1.0 / (p * p);
  for (Eigen::Index c = 0; c < maps.rows(); ++c)
    for (int y = 0; y < config_.input_height; ++y)
      for (int x = 0; x < w; ++x) out(c, (y / p) * gw + x / p) += maps(c, y * w + x) * scale;
  return out;
}

Matrix FovealEncoder::gate(const Matrix& gaze) const {
  const int cells = config_.cells();
  Matrix ones = Matrix::Ones(1, cells);
  if (!config_.foveal || gaze.size() == 0) return ones;
  const Matrix coarse = media::resize_area(gaze, config_.grid_height(), config_.grid_width());
  const double total = coarse.sum();
  if (!(total > 0.0)) return ones;
  Matrix g(1, cells);
  for (int y = 0; y < config_.grid_height(); ++y)
    for (int x = 0; x < config_.grid_width(); ++x)
      g(0, y * config_.grid_width() + x) = std::max(0.0, coarse(y, x)) / total * cells;
  return g;
}

Matrix FovealEncoder::backbone(const Matrix& image) const {
  const Matrix pre = conv.forward(prepare(image), config_.input_height, config_.input_width);
  return pool(pre.cwiseMax(0.0));
}

Matrix FovealEncoder::encode(const Matrix& image, const Matrix& gaze) const {
  if (gaze.size() != 0 && image.size() != 0 &&
      std::abs(static_cast<double>(gaze.rows()) * image.cols() - static_cast<double>(gaze.cols()) * image.rows()) > 1e-9) {
    throw Error(Errc::invalid_argument, "encoder: gaze map is not aligned with the frame");
  }
  Matrix features = backbone(image);
  const Matrix g = gate(gaze);
  for (Eigen::Index c = 0; c < features.rows(); ++c) features.row(c).array() *= g.row(0).array();
  return features;
}

void FovealEncoder::backward(const Matrix& d_features, const Matrix& image, const Matrix& gaze) {
  const Matrix g = gate(gaze);
  Matrix cols;
  const Matrix pre = conv.forward(prepare(image), config_.input_height, config_.input_width, &cols);
  const int p = config_.pool, w = config_.input_width, gw = config_.grid_width();
  const double scale = 1.0 / (p * p);
  Matrix d_pre(pre.rows(), pre.cols());
  for (Eigen::Index c = 0; c < pre.rows(); ++c)
    for (int y = 0; y < config_.input_height; ++y)
      for (int x = 0; x < w; ++x) {
        const int cell = (y / p) * gw + x / p;
        d_pre(c, y * w + x) = pre(c, y * w + x) > 0.0 ? d_features(c, cell) * g(0, cell) * scale : 0.0;
      }
  conv.backward(d_pre, cols, config_.input_height, config_.input_width, false);
}

}  // namespace xnec::model
