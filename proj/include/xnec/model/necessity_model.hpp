#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xnec/model/conv_gru.hpp"
#include "xnec/model/encoder.hpp"
#include "xnec/model/head.hpp"
#include "xnec/model/layers.hpp"

namespace xnec::model {

enum class SpatialMode { flatten, weighted_sum };
const char* to_string(SpatialMode mode);
SpatialMode parse_spatial_mode(const std::string& text);

struct ModelConfig {
  EncoderConfig encoder;
  int window = 40;
  int gru_hidden = 4;
  int gru_kernel = 3;
  std::vector<int> conv_stack = {4};
  int conv_kernel = 3;
  SpatialMode spatial = SpatialMode::flatten;
  std::vector<int> head_hidden = {32, 16};
  double dropout = 0.7;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  double threshold = 0.5;  // default sigma
  std::uint64_t init_seed = 0;

  int state_channels() const { return conv_stack.empty() ? gru_hidden : conv_stack.back(); }
  // Length of v_N.
  int visual_features() const;
  bool operator==(const ModelConfig&) const = default;
};

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

// Frame t of a window occupies columns [t * cells, (t + 1) * cells) of
// `frames`, which holds a whole clip's features; the window starts at
// `first_frame`.
struct WindowRef {
  const Matrix* frames = nullptr;
  int first_frame = 0;
  double acceleration = 0.0;
};

// Raw inputs of one frame, needed only to train the backbone.
struct FrameSource {
  const Matrix* image = nullptr;
  const Matrix* gaze = nullptr;
};

// Windows stacked step-major: column t * (windows * cells) + b * cells + p.
struct WindowBatch {
  int windows = 0;
  Matrix maps;
  Vector acceleration;
  std::vector<FrameSource> sources;  // [t * windows + b], optional
};

struct SpatioTemporalFeature {
  Matrix state;  // v_N^s: (channels, windows * cells)
  Matrix flat;   // v_N: (visual_features, windows)
};

enum class Decision { explain, silent };

struct NecessityDecision {
  double score = 0.0;
  Decision decision = Decision::silent;
  double threshold = 0.5;
};

// explain iff score >= sigma; sigma outside [0,1] throws.
NecessityDecision decide_score(double score, double sigma);

// v (channels * cells, windows) -> (channels, windows * cells); inverse of flatten.
Matrix unflatten(const Matrix& flat, int channels, int cells);
Matrix flatten(const Matrix& state, int windows, int cells);

class NecessityModel {
 public:
  NecessityModel() = default;
  explicit NecessityModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  Matrix encode_frame(const Matrix& image, const Matrix& gaze) const { return encoder.encode(image, gaze); }

  WindowBatch make_batch(std::span<const WindowRef> windows) const;

  SpatioTemporalFeature temporal_encode(const WindowBatch& batch) const;
  // Scores from v_N and a_N in evaluation mode.
  Vector head_score(const Matrix& flat, const Vector& acceleration) const;

  Vector logits(const WindowBatch& batch) const;  // evaluation mode
  Vector predict(const WindowBatch& batch) const;  // scores in (0, 1)
  NecessityDecision decide(const WindowBatch& single_window, double sigma) const;

  // One training-mode forward/backward pass; gradients are accumulated (call
  // zero_grad first). Returns the mean BCE loss.
  double train_step(const WindowBatch& batch, const Vector& labels, Rng& dropout_rng);
  // Training-mode loss without touching gradients (finite-difference checks).
  double training_loss(const WindowBatch& batch, const Vector& labels, Rng& dropout_rng);

  std::vector<Parameter*> parameters();  // trainable
  std::vector<Parameter*> tensors();     // everything stored in a checkpoint
  void zero_grad();

  FovealEncoder encoder;
  ConvGru gru;
  std::vector<Conv2d> stack;
  Parameter attention;  // (1, channels), weighted-sum mode only
  Head head;

 private:
  struct Cache;
  Matrix forward(const WindowBatch& batch, bool training, Rng* dropout_rng, Cache* cache);
  Matrix visual(const Matrix& state, int windows, Matrix* weights) const;
  void check(const WindowBatch& batch) const;

  ModelConfig config_;
};

}  // namespace xnec::model
