#pragma once

#include <vector>

#include "xnec/model/layers.hpp"

namespace xnec::model {

// Convolutional GRU: gates and state are feature maps, so the hidden state
// keeps its spatial layout across time. The state starts at zero.
//
//   z = sigmoid(Wxz * x + Whz * h + bz)
//   r = sigmoid(Wxr * x + Whr * h + br)
//   n = tanh(Wxn * x + Whn * (r . h) + bn)
//   h' = (1 - z) . n + z . h
class ConvGru {
 public:
  struct Cache {
    int steps = 0;
    Eigen::Index columns = 0;  // images * height * width per step
    Matrix input_cols;         // patches of every step, (in * k * k, steps * columns)
    std::vector<Matrix> h_prev, z, r, n, h_cols, rh_cols;
  };

  ConvGru() = default;
  ConvGru(const std::string& name, int in_channels, int hidden_channels, int kernel, Rng& rng);

  // `inputs` holds `steps` consecutive blocks of maps, step-major:
  // column t * columns + i * H * W + p. Returns the final state (hidden, columns).
  Matrix forward(const Matrix& inputs, int steps, int height, int width, Cache* cache = nullptr) const;

  // Back-propagates dL/dh_T through time, accumulating parameter gradients.
  // Returns dL/dinputs in the input layout when `need_input_grad`.
  Matrix backward(const Matrix& d_final, const Cache& cache, int height, int width, bool need_input_grad);

  int hidden_channels() const { return hidden_; }
  std::vector<Parameter*> parameters() { return {&input_weight, &input_bias, &gate_weight, &candidate_weight}; }

  Parameter input_weight;      // (3H, in * k * k), rows [z; r; n]
  Parameter input_bias;        // (3H, 1)
  Parameter gate_weight;       // (2H, H * k * k), rows [z; r]
  Parameter candidate_weight;  // (H, H * k * k)

 private:
  int in_ = 0, hidden_ = 0, kernel_ = 3;
};

}  // namespace xnec::model
