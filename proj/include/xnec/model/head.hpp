#pragma once

#include <vector>

#include "xnec/model/layers.hpp"

namespace xnec::model {

struct HeadConfig {
  int input = 65;                    // visual features + acceleration
  std::vector<int> hidden = {32, 16};
  double dropout = 0.7;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  bool operator==(const HeadConfig&) const = default;
};

// Fully connected stack: [Linear -> BatchNorm -> ReLU -> Dropout] per hidden
// layer, then Linear with bias to a single logit.
class Head {
 public:
  struct Cache {
    std::vector<Matrix> inputs;  // input of every Linear
    std::vector<BatchNorm::Cache> bn;
    std::vector<Matrix> pre_relu;
    std::vector<Matrix> masks;   // dropout masks (empty when not training)
  };

  Head() = default;
  Head(const HeadConfig& config, Rng& rng);

  const HeadConfig& config() const { return config_; }

  // x: (input, batch) -> logits (1, batch). Training mode uses batch
  // statistics and draws dropout masks from `dropout_rng` (required then).
  Matrix forward(const Matrix& x, bool training, Rng* dropout_rng, Cache* cache = nullptr);
  Matrix forward_eval(const Matrix& x) const;
  // Accumulates gradients; returns dL/dx.
  Matrix backward(const Matrix& d_logits, const Cache& cache);

  std::vector<Parameter*> parameters();
  std::vector<Parameter*> buffers();

  std::vector<Linear> linears;  // hidden.size() + 1
  std::vector<BatchNorm> norms;

 private:
  HeadConfig config_;
};

}  // namespace xnec::model
