#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "xnec/random.hpp"

namespace xnec::model {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}
  void zero_grad() { grad.setZero(); }
};

// Uniform(-bound, bound) fill from the given stream.
void init_uniform(Matrix& m, double bound, Rng& rng);

// Feature maps of a batch are stored as (channels, images * height * width):
// column `i * H * W + y * W + x` holds pixel (y, x) of image i.
//
// Patch matrix for a stride-1 "same" convolution with an odd kernel: row
// `c * k * k + ky * k + kx`, one column per output pixel, zero padding.
Matrix im2col(const Matrix& maps, int height, int width, int kernel);
// Adjoint of im2col (sums overlapping patch entries back onto the maps).
Matrix col2im(const Matrix& cols, int channels, int height, int width, int kernel);

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, bool bias, Rng& rng);

  // `cols` receives the patch matrix for the backward pass when non-null.
  Matrix forward(const Matrix& x, int height, int width, Matrix* cols = nullptr) const;
  // Accumulates weight/bias gradients; returns dL/dx when `need_input_grad`.
  Matrix backward(const Matrix& dy, const Matrix& cols, int height, int width, bool need_input_grad);

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return kernel_; }

  Parameter weight;  // (out, in * k * k)
  Parameter bias;    // (out, 1), empty when disabled

 private:
  int in_ = 0, out_ = 0, kernel_ = 3;
  bool has_bias_ = false;
};

class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out, bool bias, Rng& rng);

  Matrix forward(const Matrix& x) const;  // x: (in, batch)
  Matrix backward(const Matrix& dy, const Matrix& x);

  Parameter weight;  // (out, in)
  Parameter bias;    // (out, 1), empty when disabled
  bool has_bias() const { return has_bias_; }

 private:
  bool has_bias_ = false;
};

// Batch normalisation over the batch (column) axis. Training mode normalises
// with batch statistics and updates the running averages; evaluation mode
// uses the running averages only, so outputs are per-sample.
class BatchNorm {
 public:
  struct Cache {
    Matrix normalized;
    Vector inv_std;
  };

  BatchNorm() = default;
  BatchNorm(const std::string& name, int features, double momentum, double eps);

  Matrix forward(const Matrix& x, bool training, Cache* cache = nullptr);
  Matrix forward_eval(const Matrix& x) const;
  Matrix backward(const Matrix& dy, const Cache& cache);

  Parameter gamma, beta;
  Parameter running_mean, running_var;  // buffers, not trained

 private:
  double momentum_ = 0.1;
  double eps_ = 1e-5;
};

// Inverted dropout mask: entries are 0 with probability `rate`, else 1/(1-rate).
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng);

inline double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

// Mean binary cross-entropy computed from logits; `grad` receives dL/dlogit.
double bce_with_logits(const Vector& logits, const Vector& labels, Vector* grad = nullptr);

}  // namespace xnec::model
