#include "xnec/model/layers.hpp"

#include <cmath>

#include "xnec/error.hpp"

namespace xnec::model {

void init_uniform(Matrix& m, double bound, Rng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = (2.0 * uniform01(rng) - 1.0) * bound;
}

Matrix im2col(const Matrix& maps, int height, int width, int kernel) {
  const int plane = height * width;
  const auto channels = maps.rows();
  const auto images = maps.cols() / plane;
  const int pad = kernel / 2;
  Matrix cols = Matrix::Zero(channels * kernel * kernel, maps.cols());
  for (Eigen::Index c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const auto row = c * kernel * kernel + ky * kernel + kx;
        for (Eigen::Index img = 0; img < images; ++img) {
          const auto base = img * plane;
          for (int y = 0; y < height; ++y) {
            const int sy = y + ky - pad;
            if (sy < 0 || sy >= height) continue;
            for (int x = 0; x < width; ++x) {
              const int sx = x + kx - pad;
              if (sx < 0 || sx >= width) continue;
              cols(row, base + y * width + x) = maps(c, base + sy * width + sx);
            }
          }
        }
      }
    }
  }
  return cols;
}

Matrix col2im(const Matrix& cols, int channels, int height, int width, int kernel) {
  const int plane = height * width;
  const auto images = cols.cols() / plane;
  const int pad = kernel / 2;
  Matrix maps = Matrix::Zero(channels, cols.cols());
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const auto row = c * kernel * kernel + ky * kernel + kx;
        for (Eigen::Index img = 0; img < images; ++img) {
          const auto base = img * plane;
          for (int y = 0; y < height; ++y) {
            const int sy = y + ky - pad;
            if (sy < 0 || sy >= height) continue;
            for (int x = 0; x < width; ++x) {
              const int sx = x + kx - pad;
              if (sx < 0 || sx >= width) continue;
              maps(c, base + sy * width + sx) += cols(row, base + y * width + x);
            }
          }
        }
      }
    }
  }
  return maps;
}

Conv2d::Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, bool bias, Rng& rng)
    : weight(name + ".weight", out_channels, in_channels * kernel * kernel),
      in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      has_bias_(bias) {
  if (kernel % 2 == 0) throw Error(Errc::invalid_argument, "conv kernel must be odd");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel * kernel));
  init_uniform(weight.value, bound, rng);
  if (bias) {
    this->bias = Parameter(name + ".bias", out_channels, 1);
    init_uniform(this->bias.value, bound, rng);
  }
}

Matrix Conv2d::forward(const Matrix& x, int height, int width, Matrix* cols) const {
  if (x.rows() != in_) throw Error(Errc::invalid_argument, weight.name + ": input channel mismatch");
  Matrix patches = im2col(x, height, width, kernel_);
  Matrix y = weight.value * patches;
  if (has_bias_) y.colwise() += bias.value.col(0);
  if (cols) *cols = std::move(patches);
  return y;
}

Matrix Conv2d::backward(const Matrix& dy, const Matrix& cols, int height, int width, bool need_input_grad) {
  weight.grad.noalias() += dy * cols.transpose();
  if (has_bias_) bias.grad += dy.rowwise().sum();
  if (!need_input_grad) return {};
  return col2im(weight.value.transpose() * dy, in_, height, width, kernel_);
}

Linear::Linear(const std::string& name, int in, int out, bool bias, Rng& rng)
    : weight(name + ".weight", out, in), has_bias_(bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  init_uniform(weight.value, bound, rng);
  if (bias) {
    this->bias = Parameter(name + ".bias", out, 1);
    init_uniform(this->bias.value, bound, rng);
  }
}

Matrix Linear::forward(const Matrix& x) const {
  Matrix y = weight.value * x;
  if (has_bias_) y.colwise() += bias.value.col(0);
  return y;
}

Matrix Linear::backward(const Matrix& dy, const Matrix& x) {
  weight.grad.noalias() += dy * x.transpose();
  if (has_bias_) bias.grad += dy.rowwise().sum();
  return weight.value.transpose() * dy;
}

BatchNorm::BatchNorm(const std::string& name, int features, double momentum, double eps)
    : gamma(name + ".gamma", features, 1),
      beta(name + ".beta", features, 1),
      running_mean(name + ".running_mean", features, 1),
      running_var(name + ".running_var", features, 1),
      momentum_(momentum),
      eps_(eps) {
  gamma.value.setOnes();
  running_var.value.setOnes();
}

Matrix BatchNorm::forward(const Matrix& x, bool training, Cache* cache) {
  if (!training) return forward_eval(x);
  const double n = static_cast<double>(x.cols());
  const Vector mean = x.rowwise().mean();
  const Matrix centered = x.colwise() - mean;
  const Vector var = centered.array().square().rowwise().sum() / n;
  const Vector inv_std = (var.array() + eps_).rsqrt();
  Matrix normalized = centered.array().colwise() * inv_std.array();
  Matrix y = (normalized.array().colwise() * gamma.value.col(0).array()).colwise() + beta.value.col(0).array();
  running_mean.value.col(0) = (1.0 - momentum_) * running_mean.value.col(0) + momentum_ * mean;
  const Vector unbiased = x.cols() > 1 ? Vector(var * (n / (n - 1.0))) : var;
  running_var.value.col(0) = (1.0 - momentum_) * running_var.value.col(0) + momentum_ * unbiased;
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = inv_std;
  }
  return y;
}

Matrix BatchNorm::forward_eval(const Matrix& x) const {
  const Vector inv_std = (running_var.value.col(0).array() + eps_).rsqrt();
  const Vector scale = gamma.value.col(0).array() * inv_std.array();
  const Vector shift = beta.value.col(0).array() - running_mean.value.col(0).array() * scale.array();
  return (x.array().colwise() * scale.array()).colwise() + shift.array();
}

Matrix BatchNorm::backward(const Matrix& dy, const Cache& cache) {
  const double n = static_cast<double>(dy.cols());
  gamma.grad.col(0) += (dy.array() * cache.normalized.array()).rowwise().sum().matrix();
  beta.grad.col(0) += dy.rowwise().sum();
  const Matrix dxhat = dy.array().colwise() * gamma.value.col(0).array();
  const Vector sum_dxhat = dxhat.rowwise().sum();
  const Vector sum_dxhat_xhat = (dxhat.array() * cache.normalized.array()).rowwise().sum();
  Matrix dx = (n * dxhat.array()).colwise() - sum_dxhat.array();
  dx.array() -= cache.normalized.array().colwise() * sum_dxhat_xhat.array();
  dx.array().colwise() *= cache.inv_std.array() / n;
  return dx;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix mask(rows, cols);
  if (rate <= 0.0) {
    mask.setOnes();
    return mask;
  }
  const double keep = 1.0 - rate;
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) mask(i, j) = uniform01(rng) < keep ? 1.0 / keep : 0.0;
  return mask;
}

double bce_with_logits(const Vector& logits, const Vector& labels, Vector* grad) {
  const double n = static_cast<double>(logits.size());
  double loss = 0.0;
  if (grad) grad->resize(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double l = logits[i], y = labels[i];
    // log(1 + e^l) - y l, stable for large |l|.
    loss += std::max(l, 0.0) + std::log1p(std::exp(-std::abs(l))) - y * l;
    if (grad) (*grad)[i] = (sigmoid(l) - y) / n;
  }
  return loss / n;
}

}  // namespace xnec::model
