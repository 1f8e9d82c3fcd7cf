#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "xnec/corpus.hpp"
#include "xnec/model/necessity_model.hpp"
#include "xnec/pipeline.hpp"
#include "xnec/windows.hpp"

namespace xnec::train {

struct TrainConfig {
  double train_fraction = 0.70;
  double val_fraction = 0.10;  // test takes the remainder
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 300;
  int batch_size = 0;  // 0: the whole training set every step
  std::uint64_t seed = 0;
  double p0 = 0.5;
  int negatives_per_clip = 1;
  model::ModelConfig model;  // dropout lives here; init seed is taken from `seed`
};

void validate(const TrainConfig& config);

struct Split {
  std::vector<std::string> train, val, test;
};

// Clip-level split stratified by (score >= p0). Sizes: floor(N * train),
// floor(N * val), remainder. Throws Errc::invalid_argument for fewer than 10
// clips or unlabeled clips, Errc::validation when a class is missing from the
// training or test part.
Split split_corpus(std::span<const corpus::ClipRecord> clips, const TrainConfig& config);

// Mann-Whitney AUC with half credit for ties. Throws Errc::invalid_argument
// for single-class labels or mismatched lengths.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

std::vector<double> random_baseline(std::size_t n, std::uint64_t seed);
std::vector<double> constant_baseline(std::size_t n, double value = 0.5);

// Index drawn with probability proportional to weights[i] (inverse CDF).
std::size_t sample_weighted(std::span<const double> cumulative, Rng& rng);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double val_auc = -1.0;  // -1 when the validation windows are single-class
};

struct TrainResult {
  model::NecessityModel model;
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 0: initial model
  double best_val_auc = -1.0;
  std::vector<std::string> warnings;
};

using Progress = std::function<void(const EpochRecord&)>;

// Adam on weighted-resampled full batches; returns the checkpoint with the
// best validation AUC (last epoch when validation is single-class). Throws
// Errc::divergence on a non-finite loss.
TrainResult train(const TrainConfig& config, std::span<const windows::FrameWindow> train_windows,
                  std::span<const windows::FrameWindow> val_windows, pipeline::ClipTable& clips,
                  const corpus::Corpus& corpus, const Progress& progress = {});

// Evaluation-mode scores, computed in chunks.
std::vector<double> score_windows(const model::NecessityModel& model, std::span<const windows::FrameWindow> windows,
                                  const pipeline::ClipTable& clips, const corpus::Corpus& corpus);

struct EvalResult {
  double p0 = 0.0;
  double auc_model = 0.0;
  double auc_baseline = 0.0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
};

EvalResult evaluate(const model::NecessityModel& model, std::span<const windows::FrameWindow> test_windows,
                    const pipeline::ClipTable& clips, const corpus::Corpus& corpus, double p0, std::uint64_t seed);

// CSV `p0,auc_model,auc_baseline,n_test,seed`, six decimals.
void write_eval_csv(std::ostream& out, std::span<const EvalResult> results);

// Everything a single train/eval run produces.
struct RunResult {
  Split split;
  windows::WindowSet train, val, test;
  TrainResult trained;
  EvalResult eval;
  double train_auc = 0.0;
};

RunResult run(const corpus::Corpus& corpus, const TrainConfig& config, const Progress& progress = {});

struct SweepResult {
  std::vector<EvalResult> results;
  std::vector<std::string> warnings;  // skipped thresholds
};

// One full run per p0; thresholds with degenerate labels are skipped.
SweepResult threshold_sweep(const corpus::Corpus& corpus, std::span<const double> p0_values, const TrainConfig& config);

// Checkpoint directory: model.ckpt, split.json, history.csv.
void save_run(const std::filesystem::path& dir, const RunResult& run, const TrainConfig& config,
              const std::filesystem::path& manifest);

struct SavedRun {
  model::NecessityModel model;
  Split split;
  double p0 = 0.5;
  int negatives_per_clip = 1;
  std::uint64_t seed = 0;
  std::filesystem::path manifest;
};

SavedRun load_run(const std::filesystem::path& dir);

}  // namespace xnec::train
