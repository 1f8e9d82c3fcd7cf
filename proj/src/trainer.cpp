#include "xnec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "xnec/error.hpp"
#include "xnec/model/checkpoint.hpp"

namespace xnec::train {

using model::Matrix;
using model::NecessityModel;
using model::Parameter;
using model::Vector;
using windows::FrameWindow;

void validate(const TrainConfig& c) {
  if (!(c.train_fraction > 0.0 && c.val_fraction >= 0.0 && c.train_fraction + c.val_fraction < 1.0)) {
    throw Error(Errc::invalid_argument, "split fractions must leave a non-empty test part", "split");
  }
  if (!(c.learning_rate > 0.0)) throw Error(Errc::invalid_argument, "learning rate must be positive", "learning_rate");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0)) {
    throw Error(Errc::invalid_argument, "Adam decay rates must lie in [0,1)", "beta");
  }
  if (c.epochs < 0) throw Error(Errc::invalid_argument, "epochs must be non-negative", "epochs");
  if (c.batch_size < 0) throw Error(Errc::invalid_argument, "batch size must be non-negative", "batch_size");
  if (!(c.p0 >= 0.0 && c.p0 <= 1.0)) throw Error(Errc::invalid_argument, "p0 must lie in [0,1]", "p0");
  if (c.negatives_per_clip < 1) throw Error(Errc::invalid_argument, "negatives_per_clip must be positive", "negatives_per_clip");
}

Split split_corpus(std::span<const corpus::ClipRecord> clips, const TrainConfig& config) {
  validate(config);
  if (clips.size() < 10) throw Error(Errc::invalid_argument, "split needs at least 10 clips");
  std::vector<std::string> strata[2];
  for (const auto& c : clips) {
    if (!c.labeled()) throw Error(Errc::invalid_argument, c.vid + ": unlabeled clip cannot be split", "necessity_score");
    strata[*c.necessity_score >= config.p0 ? 1 : 0].push_back(c.vid);
  }
  Rng rng = make_stream(config.seed, "split");
  // (fractional position, stratum, index, vid): spreading each shuffled
  // stratum evenly over [0, 1) keeps class proportions in every prefix.
  std::vector<std::tuple<double, int, std::size_t, std::string>> order;
  for (int s = 0; s < 2; ++s) {
    auto& ids = strata[s];
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw Error(Errc::invalid_argument, "duplicate vid in split input");
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[windows::uniform_index(rng, i)]);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      order.emplace_back((static_cast<double>(i) + 0.5) / static_cast<double>(ids.size()), s, i, ids[i]);
    }
  }
  std::sort(order.begin(), order.end());
  const std::size_t n = order.size();
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * config.train_fraction + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * config.val_fraction + 1e-9));
  Split split;
  bool train_has[2] = {false, false}, test_has[2] = {false, false};
  for (std::size_t k = 0; k < n; ++k) {
    const auto& [pos, s, i, vid] = order[k];
    if (k < n_train) {
      split.train.push_back(vid);
      train_has[s] = true;
    } else if (k < n_train + n_val) {
      split.val.push_back(vid);
    } else {
      split.test.push_back(vid);
      test_has[s] = true;
    }
  }
  if (!train_has[0] || !train_has[1] || !test_has[0] || !test_has[1]) {
    throw Error(Errc::validation, "too few clips per stratum at p0 = " + std::to_string(config.p0) + " (" +
                                      std::to_string(strata[1].size()) + " above, " + std::to_string(strata[0].size()) +
                                      " below)", "p0");
  }
  for (auto* part : {&split.train, &split.val, &split.test}) std::sort(part->begin(), part->end());
  return split;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(Errc::invalid_argument, "roc_auc: length mismatch");
  std::size_t n1 = 0;
  for (int y : labels) n1 += y ? 1 : 0;
  const std::size_t n0 = labels.size() - n1;
  if (n1 == 0 || n0 == 0) throw Error(Errc::invalid_argument, "roc_auc: both classes are required");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (double s : scores)
    if (std::isnan(s)) throw Error(Errc::invalid_argument, "roc_auc: NaN score");
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the positive rank sum, with midranks for ties; kept integral.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const std::uint64_t twice_mid = i + 1 + j;  // 2 * (i + 1 + j) / 2
    for (std::size_t k = i; k < j; ++k)
      if (labels[idx[k]]) twice_rank_sum += twice_mid;
    i = j;
  }
  const std::uint64_t twice_u = twice_rank_sum - n1 * (n1 + 1);
  return static_cast<double>(twice_u) / 2.0 / (static_cast<double>(n1) * static_cast<double>(n0));
}

std::vector<double> random_baseline(std::size_t n, std::uint64_t seed) {
  Rng rng = make_stream(seed, "baseline");
  std::vector<double> out(n);
  for (auto& v : out) v = uniform01(rng);
  return out;
}

std::vector<double> constant_baseline(std::size_t n, double value) { return std::vector<double>(n, value); }

std::size_t sample_weighted(std::span<const double> cumulative, Rng& rng) {
  if (cumulative.empty() || !(cumulative.back() > 0.0)) throw Error(Errc::invalid_argument, "sampler: no positive weight");
  const double u = uniform01(rng) * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

namespace {

struct Adam {
  struct Slot {
    Matrix m, v;
  };
  std::vector<Slot> slots;
  long step = 0;

  explicit Adam(const std::vector<Parameter*>& params) {
    for (const Parameter* p : params) {
      slots.push_back({Matrix::Zero(p->value.rows(), p->value.cols()), Matrix::Zero(p->value.rows(), p->value.cols())});
    }
  }

  void update(const std::vector<Parameter*>& params, const TrainConfig& c) {
    ++step;
    const double c1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter& p = *params[i];
      Slot& s = slots[i];
      s.m = c.beta1 * s.m + (1.0 - c.beta1) * p.grad;
      s.v = c.beta2 * s.v + (1.0 - c.beta2) * p.grad.cwiseProduct(p.grad);
      p.value.array() -= c.learning_rate * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + c.adam_eps);
    }
  }
};

model::WindowRef ref_of(const FrameWindow& w, const pipeline::ClipTable& clips) {
  const auto it = clips.find(w.vid);
  if (it == clips.end()) throw Error(Errc::unknown_id, "no features loaded for clip " + w.vid, "vid");
  return {&it->second.features, w.first_frame(), w.acceleration};
}

std::vector<int> labels_of(std::span<const FrameWindow> ws) {
  std::vector<int> y;
  y.reserve(ws.size());
  for (const auto& w : ws) y.push_back(w.label);
  return y;
}

bool both_classes(std::span<const int> y) {
  bool seen[2] = {false, false};
  for (int v : y) seen[v ? 1 : 0] = true;
  return seen[0] && seen[1];
}

bool finite_parameters(NecessityModel& m) {
  for (Parameter* p : m.parameters())
    if (!p->value.allFinite()) return false;
  return true;
}

}  // namespace

std::vector<double> score_windows(const NecessityModel& model, std::span<const FrameWindow> ws,
                                  const pipeline::ClipTable& clips, const corpus::Corpus&) {
  constexpr std::size_t kChunk = 256;
  std::vector<double> out;
  out.reserve(ws.size());
  for (std::size_t start = 0; start < ws.size(); start += kChunk) {
    const std::size_t end = std::min(ws.size(), start + kChunk);
    std::vector<model::WindowRef> refs;
    for (std::size_t i = start; i < end; ++i) refs.push_back(ref_of(ws[i], clips));
    const Vector s = model.predict(model.make_batch(refs));
    out.insert(out.end(), s.data(), s.data() + s.size());
  }
  return out;
}

TrainResult train(const TrainConfig& config, std::span<const FrameWindow> train_windows,
                  std::span<const FrameWindow> val_windows, pipeline::ClipTable& clips, const corpus::Corpus& corpus,
                  const Progress& progress) {
  validate(config);
  model::ModelConfig mc = config.model;
  mc.init_seed = config.seed;
  TrainResult result{NecessityModel(mc), {}, 0, -1.0, {}};
  if (train_windows.empty()) throw Error(Errc::invalid_argument, "no training windows");
  const std::vector<int> labels = labels_of(train_windows);
  if (!both_classes(labels)) throw Error(Errc::invalid_argument, "training windows must contain both classes", "p0");
  if (config.epochs == 0) return result;
  if (config.batch_size > 0) {
    result.warnings.push_back("mini-batch training (batch " + std::to_string(config.batch_size) +
                              ") deviates from the full-batch protocol");
  }

  NecessityModel& model = result.model;
  const bool backbone = mc.encoder.trainable;
  if (backbone) {
    for (const auto& [vid, data] : clips)
      if (data.media.images.empty()) throw Error(Errc::invalid_argument, vid + ": backbone training needs media");
  }
  const std::vector<double> weights = windows::class_weights(labels);
  std::vector<double> cumulative(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());

  const std::vector<int> val_labels = labels_of(val_windows);
  const bool val_usable = both_classes(val_labels);
  if (!val_usable) result.warnings.push_back("validation windows are single-class; keeping the last epoch");

  Rng sampler = make_stream(config.seed, "sampler");
  Rng dropout = make_stream(config.seed, "dropout");
  const auto params = model.parameters();
  Adam adam(params);
  const std::size_t n = train_windows.size();
  const std::size_t batch = config.batch_size > 0 ? std::min<std::size_t>(config.batch_size, n) : n;
  const std::size_t steps = (n + batch - 1) / batch;
  NecessityModel best = model;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      std::vector<model::WindowRef> refs;
      std::vector<const FrameWindow*> picked;
      Vector y(static_cast<Eigen::Index>(batch));
      for (std::size_t k = 0; k < batch; ++k) {
        const FrameWindow& w = train_windows[sample_weighted(cumulative, sampler)];
        picked.push_back(&w);
        refs.push_back(ref_of(w, clips));
        y(static_cast<Eigen::Index>(k)) = w.label;
      }
      model::WindowBatch wb = model.make_batch(refs);
      if (backbone) {
        wb.sources.resize(static_cast<std::size_t>(mc.window) * batch);
        for (int t = 0; t < mc.window; ++t)
          for (std::size_t b = 0; b < batch; ++b) {
            const auto& media = clips.at(picked[b]->vid).media;
            const std::size_t f = static_cast<std::size_t>(picked[b]->first_frame() + t);
            wb.sources[t * batch + b] = {&media.images[f], media.gazes.empty() ? nullptr : &media.gazes[f]};
          }
      }
      model.zero_grad();
      const double loss = model.train_step(wb, y, dropout);
      if (!std::isfinite(loss)) {
        throw Error(Errc::divergence, "training diverged at epoch " + std::to_string(epoch) + " (loss " +
                                          std::to_string(loss) + "); lower the learning rate");
      }
      adam.update(params, config);
      epoch_loss += loss / static_cast<double>(steps);
    }
    if (!finite_parameters(model)) {
      throw Error(Errc::divergence, "training diverged at epoch " + std::to_string(epoch) + " (non-finite parameters)");
    }
    if (backbone) pipeline::refresh_features(clips, model.encoder);

    EpochRecord rec{epoch, epoch_loss, -1.0};
    if (val_usable) {
      rec.val_auc = roc_auc(score_windows(model, val_windows, clips, corpus), val_labels);
      if (rec.val_auc > result.best_val_auc) {
        result.best_val_auc = rec.val_auc;
        result.best_epoch = epoch;
        best = model;
      }
    }
    result.history.push_back(rec);
    if (progress) progress(rec);
  }
  if (val_usable) {
    model = std::move(best);
    if (backbone) pipeline::refresh_features(clips, model.encoder);
  } else {
    result.best_epoch = config.epochs;
  }
  return result;
}

EvalResult evaluate(const NecessityModel& model, std::span<const FrameWindow> test_windows,
                    const pipeline::ClipTable& clips, const corpus::Corpus& corpus, double p0, std::uint64_t seed) {
  const std::vector<int> y = labels_of(test_windows);
  EvalResult r;
  r.p0 = p0;
  r.seed = seed;
  r.n_test = test_windows.size();
  r.auc_model = roc_auc(score_windows(model, test_windows, clips, corpus), y);
  r.auc_baseline = roc_auc(random_baseline(test_windows.size(), seed), y);
  return r;
}

void write_eval_csv(std::ostream& out, std::span<const EvalResult> results) {
  out << "p0,auc_model,auc_baseline,n_test,seed\n";
  char buf[160];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%zu,%llu\n", r.p0, r.auc_model, r.auc_baseline, r.n_test,
                  static_cast<unsigned long long>(r.seed));
    out << buf;
  }
}

namespace {

std::vector<corpus::ClipRecord> pick(const corpus::Corpus& corpus, const std::vector<std::string>& vids) {
  std::vector<corpus::ClipRecord> out;
  for (const auto& v : vids) out.push_back(corpus.find(v));
  return out;
}

}  // namespace

RunResult run(const corpus::Corpus& corpus, const TrainConfig& config, const Progress& progress) {
  validate(config);
  std::vector<corpus::ClipRecord> labeled;
  for (const auto& c : corpus.clips)
    if (c.labeled()) labeled.push_back(c);
  RunResult r;
  r.split = split_corpus(labeled, config);
  const windows::LabelingPolicy policy{config.p0, config.negatives_per_clip, config.seed};
  r.train = windows::extract(pick(corpus, r.split.train), policy);
  r.val = windows::extract(pick(corpus, r.split.val), policy);
  r.test = windows::extract(pick(corpus, r.split.test), policy);

  std::vector<std::string> vids;
  for (const auto* set : {&r.train, &r.val, &r.test})
    for (const auto& w : set->windows) vids.push_back(w.vid);
  const model::FovealEncoder encoder(config.model.encoder);
  pipeline::ClipTable clips = pipeline::load_clips(corpus, vids, encoder, config.model.encoder.trainable);

  r.trained = train(config, r.train.windows, r.val.windows, clips, corpus, progress);
  r.train_auc = roc_auc(score_windows(r.trained.model, r.train.windows, clips, corpus), labels_of(r.train.windows));
  r.eval = evaluate(r.trained.model, r.test.windows, clips, corpus, config.p0, config.seed);
  return r;
}

SweepResult threshold_sweep(const corpus::Corpus& corpus, std::span<const double> p0_values, const TrainConfig& config) {
  SweepResult out;
  for (double p0 : p0_values) {
    TrainConfig c = config;
    c.p0 = p0;
    try {
      out.results.push_back(run(corpus, c).eval);
    } catch (const Error& e) {
      if (e.code() != Errc::validation && e.code() != Errc::invalid_argument) throw;
      if (e.field() != "p0") throw;
      out.warnings.push_back("skipping p0 = " + std::to_string(p0) + ": " + e.what());
    }
  }
  return out;
}

void save_run(const std::filesystem::path& dir, const RunResult& r, const TrainConfig& config,
              const std::filesystem::path& manifest) {
  std::filesystem::create_directories(dir);
  NecessityModel copy = r.trained.model;
  model::save_checkpoint(dir / "model.ckpt", copy);
  nlohmann::json j = {
      {"p0", config.p0},
      {"seed", config.seed},
      {"negatives_per_clip", config.negatives_per_clip},
      {"manifest", std::filesystem::absolute(manifest).lexically_normal().string()},
      {"best_epoch", r.trained.best_epoch},
      {"train", r.split.train},
      {"val", r.split.val},
      {"test", r.split.test},
  };
  std::ofstream(dir / "split.json") << j.dump(2) << "\n";
  std::ofstream hist(dir / "history.csv");
  hist << "epoch,loss,val_auc\n";
  char buf[96];
  for (const auto& e : r.trained.history) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.6f\n", e.epoch, e.loss, e.val_auc);
    hist << buf;
  }
}

SavedRun load_run(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "model.ckpt")) throw Error(Errc::not_found, "no model.ckpt in " + dir.string(), "ckpt");
  SavedRun s{model::load_checkpoint(dir / "model.ckpt"), {}, 0.5, 1, 0, {}};
  std::ifstream in(dir / "split.json");
  if (!in) throw Error(Errc::not_found, "no split.json in " + dir.string(), "ckpt");
  try {
    const auto j = nlohmann::json::parse(in);
    s.p0 = j.at("p0").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.negatives_per_clip = j.at("negatives_per_clip").get<int>();
    s.manifest = j.at("manifest").get<std::string>();
    s.split.train = j.at("train").get<std::vector<std::string>>();
    s.split.val = j.at("val").get<std::vector<std::string>>();
    s.split.test = j.at("test").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::validation, std::string("split.json: ") + e.what());
  }
  return s;
}

}  // namespace xnec::train
