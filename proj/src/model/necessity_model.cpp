#include "xnec/model/necessity_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "xnec/error.hpp"

namespace xnec::model {

using nlohmann::json;

const char* to_string(SpatialMode mode) { return mode == SpatialMode::flatten ? "flatten" : "weighted_sum"; }

SpatialMode parse_spatial_mode(const std::string& text) {
  if (text == "flatten") return SpatialMode::flatten;
  if (text == "weighted_sum") return SpatialMode::weighted_sum;
  throw Error(Errc::invalid_argument, "unknown spatial mode '" + text + "'", "spatial");
}

int ModelConfig::visual_features() const {
  return spatial == SpatialMode::flatten ? state_channels() * encoder.cells() : state_channels();
}

std::string config_to_json(const ModelConfig& c) {
  json j = {
      {"encoder",
       {{"input_height", c.encoder.input_height},
        {"input_width", c.encoder.input_width},
        {"pool", c.encoder.pool},
        {"foveal", c.encoder.foveal},
        {"trainable", c.encoder.trainable}}},
      {"window", c.window},
      {"gru_hidden", c.gru_hidden},
      {"gru_kernel", c.gru_kernel},
      {"conv_stack", c.conv_stack},
      {"conv_kernel", c.conv_kernel},
      {"spatial", to_string(c.spatial)},
      {"head_hidden", c.head_hidden},
      {"dropout", c.dropout},
      {"bn_momentum", c.bn_momentum},
      {"bn_eps", c.bn_eps},
      {"threshold", c.threshold},
      {"init_seed", c.init_seed},
  };
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  ModelConfig c;
  try {
    const json j = json::parse(text);
    const json& e = j.at("encoder");
    c.encoder.input_height = e.at("input_height").get<int>();
    c.encoder.input_width = e.at("input_width").get<int>();
    c.encoder.pool = e.at("pool").get<int>();
    c.encoder.foveal = e.at("foveal").get<bool>();
    c.encoder.trainable = e.at("trainable").get<bool>();
    c.window = j.at("window").get<int>();
    c.gru_hidden = j.at("gru_hidden").get<int>();
    c.gru_kernel = j.at("gru_kernel").get<int>();
    c.conv_stack = j.at("conv_stack").get<std::vector<int>>();
    c.conv_kernel = j.at("conv_kernel").get<int>();
    c.spatial = parse_spatial_mode(j.at("spatial").get<std::string>());
    c.head_hidden = j.at("head_hidden").get<std::vector<int>>();
    c.dropout = j.at("dropout").get<double>();
    c.bn_momentum = j.at("bn_momentum").get<double>();
    c.bn_eps = j.at("bn_eps").get<double>();
    c.threshold = j.at("threshold").get<double>();
    c.init_seed = j.at("init_seed").get<std::uint64_t>();
  } catch (const json::exception& ex) {
    throw Error(Errc::validation, std::string("model config: ") + ex.what());
  }
  return c;
}

NecessityDecision decide_score(double score, double sigma) {
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw Error(Errc::invalid_argument, "threshold must lie in [0,1]", "sigma");
  return {score, score >= sigma ? Decision::explain : Decision::silent, sigma};
}

Matrix flatten(const Matrix& state, int windows, int cells) {
  const auto channels = state.rows();
  Matrix flat(channels * cells, windows);
  for (int b = 0; b < windows; ++b)
    for (Eigen::Index c = 0; c < channels; ++c)
      for (int p = 0; p < cells; ++p) flat(c * cells + p, b) = state(c, b * cells + p);
  return flat;
}

Matrix unflatten(const Matrix& flat, int channels, int cells) {
  if (flat.rows() != static_cast<Eigen::Index>(channels) * cells) throw Error(Errc::invalid_argument, "unflatten: size mismatch");
  const auto windows = flat.cols();
  Matrix state(channels, windows * cells);
  for (Eigen::Index b = 0; b < windows; ++b)
    for (int c = 0; c < channels; ++c)
      for (int p = 0; p < cells; ++p) state(c, b * cells + p) = flat(c * cells + p, b);
  return state;
}

struct NecessityModel::Cache {
  ConvGru::Cache gru;
  std::vector<Matrix> stack_cols, stack_pre;
  Matrix state;
  Matrix weights;  // attention weights (1, windows * cells)
  Matrix head_input;
  Head::Cache head;
};

NecessityModel::NecessityModel(const ModelConfig& config) : encoder(config.encoder), config_(config) {
  if (config.window <= 0) throw Error(Errc::invalid_argument, "window must be positive", "window");
  if (config.gru_hidden <= 0) throw Error(Errc::invalid_argument, "gru_hidden must be positive", "gru_hidden");
  Rng rng = make_stream(config.init_seed, "model-init");
  gru = ConvGru("gru", FovealEncoder::kChannels, config.gru_hidden, config.gru_kernel, rng);
  int in = config.gru_hidden;
  for (std::size_t i = 0; i < config.conv_stack.size(); ++i) {
    stack.emplace_back("stack" + std::to_string(i), in, config.conv_stack[i], config.conv_kernel, true, rng);
    in = config.conv_stack[i];
  }
  if (config.spatial == SpatialMode::weighted_sum) {
    attention = Parameter("attention.weight", 1, config.state_channels());
    init_uniform(attention.value, 1.0 / std::sqrt(static_cast<double>(config.state_channels())), rng);
  }
  HeadConfig hc;
  hc.input = config.visual_features() + 1;
  hc.hidden = config.head_hidden;
  hc.dropout = config.dropout;
  hc.bn_momentum = config.bn_momentum;
  hc.bn_eps = config.bn_eps;
  head = Head(hc, rng);
}

WindowBatch NecessityModel::make_batch(std::span<const WindowRef> windows) const {
  const int cells = config_.encoder.cells();
  const int n = static_cast<int>(windows.size());
  WindowBatch batch;
  batch.windows = n;
  batch.maps.resize(FovealEncoder::kChannels, static_cast<Eigen::Index>(config_.window) * n * cells);
  batch.acceleration.resize(n);
  for (int b = 0; b < n; ++b) {
    const WindowRef& w = windows[b];
    if (!w.frames || w.first_frame < 0 || (w.first_frame + config_.window) * cells > w.frames->cols() ||
        w.frames->rows() != FovealEncoder::kChannels) {
      throw Error(Errc::invalid_argument, "window does not fit inside its clip features");
    }
    for (int t = 0; t < config_.window; ++t) {
      batch.maps.middleCols((static_cast<Eigen::Index>(t) * n + b) * cells, cells) =
          w.frames->middleCols((w.first_frame + t) * cells, cells);
    }
    batch.acceleration(b) = w.acceleration;
  }
  return batch;
}

void NecessityModel::check(const WindowBatch& batch) const {
  const Eigen::Index expected = static_cast<Eigen::Index>(config_.window) * batch.windows * config_.encoder.cells();
  if (batch.windows <= 0) throw Error(Errc::invalid_argument, "empty batch");
  if (batch.maps.rows() != FovealEncoder::kChannels || batch.maps.cols() != expected) {
    throw Error(Errc::invalid_argument,
                "window length must be " + std::to_string(config_.window) + " frames", "window");
  }
  if (batch.acceleration.size() != batch.windows) throw Error(Errc::invalid_argument, "acceleration count mismatch");
  if (!batch.acceleration.allFinite()) throw Error(Errc::invalid_argument, "non-finite acceleration", "acceleration");
}

Matrix NecessityModel::visual(const Matrix& state, int windows, Matrix* weights) const {
  const int cells = config_.encoder.cells();
  if (config_.spatial == SpatialMode::flatten) return flatten(state, windows, cells);
  const Matrix energy = attention.value * state;  // (1, windows * cells)
  Matrix alpha(1, energy.cols());
  Matrix out(state.rows(), windows);
  for (int b = 0; b < windows; ++b) {
    const auto block = energy.middleCols(b * cells, cells);
    const double top = block.maxCoeff();
    const Matrix e = (block.array() - top).exp().matrix();
    alpha.middleCols(b * cells, cells) = e / e.sum();
    out.col(b) = state.middleCols(b * cells, cells) * alpha.middleCols(b * cells, cells).transpose();
  }
  if (weights) *weights = alpha;
  return out;
}

SpatioTemporalFeature NecessityModel::temporal_encode(const WindowBatch& batch) const {
  check(batch);
  const int h = config_.encoder.grid_height(), w = config_.encoder.grid_width();
  Matrix s = gru.forward(batch.maps, config_.window, h, w);
  for (const auto& conv : stack) s = conv.forward(s, h, w).cwiseMax(0.0);
  SpatioTemporalFeature out;
  out.flat = visual(s, batch.windows, nullptr);
  out.state = std::move(s);
  return out;
}

Vector NecessityModel::head_score(const Matrix& flat, const Vector& acceleration) const {
  if (flat.cols() != acceleration.size()) throw Error(Errc::invalid_argument, "head: batch size mismatch");
  Matrix x(flat.rows() + 1, flat.cols());
  x.topRows(flat.rows()) = flat;
  x.row(flat.rows()) = acceleration.transpose();
  const Matrix z = head.forward_eval(x);
  Vector out(z.cols());
  const double lo = std::numeric_limits<double>::denorm_min(), hi = std::nextafter(1.0, 0.0);
  for (Eigen::Index i = 0; i < z.cols(); ++i) out(i) = std::clamp(sigmoid(z(0, i)), lo, hi);
  return out;
}

Vector NecessityModel::logits(const WindowBatch& batch) const {
  const SpatioTemporalFeature f = temporal_encode(batch);
  Matrix x(f.flat.rows() + 1, f.flat.cols());
  x.topRows(f.flat.rows()) = f.flat;
  x.row(f.flat.rows()) = batch.acceleration.transpose();
  return head.forward_eval(x).row(0).transpose();
}

Vector NecessityModel::predict(const WindowBatch& batch) const {
  const SpatioTemporalFeature f = temporal_encode(batch);
  return head_score(f.flat, batch.acceleration);
}

NecessityDecision NecessityModel::decide(const WindowBatch& single_window, double sigma) const {
  if (single_window.windows != 1) throw Error(Errc::invalid_argument, "decide takes exactly one window");
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw Error(Errc::invalid_argument, "threshold must lie in [0,1]", "sigma");
  return decide_score(predict(single_window)(0), sigma);
}

Matrix NecessityModel::forward(const WindowBatch& batch, bool training, Rng* dropout_rng, Cache* cache) {
  check(batch);
  const int h = config_.encoder.grid_height(), w = config_.encoder.grid_width();
  Matrix s = gru.forward(batch.maps, config_.window, h, w, cache ? &cache->gru : nullptr);
  for (auto& conv : stack) {
    Matrix cols;
    Matrix pre = conv.forward(s, h, w, &cols);
    s = pre.cwiseMax(0.0);
    if (cache) {
      cache->stack_cols.push_back(std::move(cols));
      cache->stack_pre.push_back(std::move(pre));
    }
  }
  const Matrix v = visual(s, batch.windows, cache ? &cache->weights : nullptr);
  Matrix x(v.rows() + 1, v.cols());
  x.topRows(v.rows()) = v;
  x.row(v.rows()) = batch.acceleration.transpose();
  Matrix z = head.forward(x, training, dropout_rng, cache ? &cache->head : nullptr);
  if (cache) {
    cache->state = std::move(s);
    cache->head_input = std::move(x);
  }
  return z;
}

double NecessityModel::training_loss(const WindowBatch& batch, const Vector& labels, Rng& dropout_rng) {
  const Matrix z = forward(batch, true, &dropout_rng, nullptr);
  return bce_with_logits(z.row(0).transpose(), labels);
}

double NecessityModel::train_step(const WindowBatch& batch, const Vector& labels, Rng& dropout_rng) {
  if (labels.size() != batch.windows) throw Error(Errc::invalid_argument, "label count mismatch");
  Cache cache;
  const Matrix z = forward(batch, true, &dropout_rng, &cache);
  Vector dz;
  const double loss = bce_with_logits(z.row(0).transpose(), labels, &dz);
  const Matrix dx = head.backward(dz.transpose(), cache.head);
  const Matrix dv = dx.topRows(dx.rows() - 1);

  const int cells = config_.encoder.cells();
  const int h = config_.encoder.grid_height(), w = config_.encoder.grid_width();
  Matrix ds;
  if (config_.spatial == SpatialMode::flatten) {
    ds = unflatten(dv, config_.state_channels(), cells);
  } else {
    const Matrix& s = cache.state;
    ds.resize(s.rows(), s.cols());
    Matrix de(1, s.cols());
    for (int b = 0; b < batch.windows; ++b) {
      const auto alpha = cache.weights.middleCols(b * cells, cells);
      const auto sb = s.middleCols(b * cells, cells);
      const Matrix da = dv.col(b).transpose() * sb;  // (1, cells)
      const double mean = (alpha.array() * da.array()).sum();
      de.middleCols(b * cells, cells) = (alpha.array() * (da.array() - mean)).matrix();
      ds.middleCols(b * cells, cells) = dv.col(b) * alpha;
    }
    attention.grad.noalias() += de * s.transpose();
    ds.noalias() += attention.value.transpose() * de;
  }
  for (std::size_t i = stack.size(); i-- > 0;) {
    ds = ds.cwiseProduct((cache.stack_pre[i].array() > 0.0).cast<double>().matrix());
    ds = stack[i].backward(ds, cache.stack_cols[i], h, w, true);
  }
  const bool backbone = config_.encoder.trainable && !batch.sources.empty();
  const Matrix dmaps = gru.backward(ds, cache.gru, h, w, backbone);
  if (backbone) {
    if (batch.sources.size() != static_cast<std::size_t>(config_.window) * batch.windows) {
      throw Error(Errc::invalid_argument, "frame sources do not match the batch");
    }
    for (std::size_t k = 0; k < batch.sources.size(); ++k) {
      const FrameSource& src = batch.sources[k];
      const Matrix empty;
      encoder.backward(dmaps.middleCols(static_cast<Eigen::Index>(k) * cells, cells), *src.image,
                       src.gaze ? *src.gaze : empty);
    }
  }
  return loss;
}

std::vector<Parameter*> NecessityModel::parameters() {
  std::vector<Parameter*> out;
  if (config_.encoder.trainable) {
    out.push_back(&encoder.conv.weight);
    out.push_back(&encoder.conv.bias);
  }
  for (Parameter* p : gru.parameters()) out.push_back(p);
  for (auto& conv : stack) {
    out.push_back(&conv.weight);
    out.push_back(&conv.bias);
  }
  if (config_.spatial == SpatialMode::weighted_sum) out.push_back(&attention);
  for (Parameter* p : head.parameters()) out.push_back(p);
  return out;
}

std::vector<Parameter*> NecessityModel::tensors() {
  std::vector<Parameter*> out;
  if (!config_.encoder.trainable) {
    out.push_back(&encoder.conv.weight);
    out.push_back(&encoder.conv.bias);
  }
  for (Parameter* p : parameters()) out.push_back(p);
  for (Parameter* p : head.buffers()) out.push_back(p);
  return out;
}

void NecessityModel::zero_grad() {
  for (Parameter* p : tensors()) p->zero_grad();
}

}  // namespace xnec::model
