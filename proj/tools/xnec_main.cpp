// xnec: command-line entry point for the explanation-necessity pipeline.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "xnec/aggregate.hpp"
#include "xnec/cluster.hpp"
#include "xnec/corpus.hpp"
#include "xnec/csv.hpp"
#include "xnec/error.hpp"
#include "xnec/fixture.hpp"
#include "xnec/http_server.hpp"
#include "xnec/studystats.hpp"
#include "xnec/trainer.hpp"
#include "xnec/windows.hpp"

namespace fs = std::filesystem;
using namespace xnec;

namespace {

void artifact(const fs::path& p) { std::cout << "wrote " << p.string() << "\n"; }

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(csv::to_double(item, "p0"));
  if (out.empty()) throw Error(Errc::invalid_argument, "empty p0 list", "p0");
  return out;
}

struct ModelFlags {
  bool plain = false;
  bool trainable = false;
  std::string spatial = "flatten";
  int epochs = 300;
  int batch_size = 0;
  double learning_rate = 1e-2;
  double dropout = 0.7;
  int negatives = 1;

  void add(CLI::App* cmd) {
    cmd->add_flag("--plain", plain, "Ungated backbone features (no foveal gating)");
    cmd->add_flag("--train-backbone", trainable, "Also train the frame encoder");
    cmd->add_option("--spatial", spatial, "Spatial transform: flatten or weighted_sum")
        ->check(CLI::IsMember({"flatten", "weighted_sum"}));
    cmd->add_option("--epochs", epochs, "Training epochs")->check(CLI::NonNegativeNumber);
    cmd->add_option("--batch-size", batch_size, "Mini-batch size (0 = full batch)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--lr", learning_rate, "Adam learning rate");
    cmd->add_option("--dropout", dropout, "Dropout rate of the head");
    cmd->add_option("--negatives-per-clip", negatives, "Negative windows per low-score clip");
  }

  train::TrainConfig config(double p0, std::uint64_t seed) const {
    train::TrainConfig c;
    c.p0 = p0;
    c.seed = seed;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.learning_rate = learning_rate;
    c.negatives_per_clip = negatives;
    c.model.encoder.foveal = !plain;
    c.model.encoder.trainable = trainable;
    c.model.spatial = model::parse_spatial_mode(spatial);
    c.model.dropout = dropout;
    return c;
  }
};

int cmd_ingest(const fs::path& clips_csv, const fs::path& out_dir) {
  const auto table = csv::read_table(clips_csv, {"vid", "video", "telemetry"});
  const fs::path base = clips_csv.parent_path();
  corpus::Corpus corpus;
  corpus.root = out_dir;
  std::size_t skipped = 0;
  for (const auto& row : table.rows) {
    corpus::IngestRequest req;
    req.vid = row[table.column("vid")];
    req.video = base / row[table.column("video")];
    if (table.has_column("gaze") && !row[table.column("gaze")].empty()) req.gaze = base / row[table.column("gaze")];
    try {
      req.telemetry = corpus::read_telemetry(base / row[table.column("telemetry")]);
      corpus.clips.push_back(corpus::ingest_clip(req, out_dir));
    } catch (const Error& e) {
      if (e.code() != Errc::corrupt_video && e.code() != Errc::empty_telemetry) throw;
      warn(req.vid + " skipped (" + to_string(e.code()) + "): " + e.what());
      ++skipped;
    }
  }
  if (corpus.clips.empty()) throw Error(Errc::validation, "no clip could be ingested");
  const fs::path manifest = out_dir / "manifest.json";
  corpus::save_manifest(corpus, manifest);
  std::cout << "ingested " << corpus.clips.size() << " clips, skipped " << skipped << "\n";
  artifact(manifest);
  return 0;
}

int cmd_filter(const fs::path& manifest, const fs::path& flags, const fs::path& out, const std::string& report) {
  auto corpus = corpus::load_manifest(manifest);
  const auto result = corpus::filter_corpus(corpus.clips, corpus::read_flags(flags));
  corpus::Corpus kept{result.kept, corpus.root};
  corpus::save_manifest(kept, out);
  std::cout << "kept " << kept.clips.size() << " of " << corpus.clips.size() << " clips\n";
  artifact(out);
  if (!report.empty()) {
    std::ofstream r(report);
    r << "vid,passed,violated_assumptions\n";
    for (const auto& rep : result.reports) {
      std::string v;
      for (auto x : rep.violated_assumptions) v += (v.empty() ? "" : ";") + std::string(corpus::to_string(x));
      csv::write_row(r, {rep.vid, rep.passed ? "true" : "false", v});
    }
    artifact(report);
  }
  return 0;
}

int cmd_aggregate(const fs::path& manifest, const fs::path& annotations, const fs::path& out, bool likert) {
  auto corpus = corpus::load_manifest(manifest);
  const auto events = aggregate::read_annotations(annotations, likert);
  std::vector<aggregate::AnnotationEvent> known;
  for (const auto& e : events) {
    bool found = false;
    for (const auto& c : corpus.clips) found = found || c.vid == e.vid;
    if (found) known.push_back(e);
  }
  if (known.size() != events.size()) warn(std::to_string(events.size() - known.size()) + " events refer to clips outside the corpus");
  const auto result = aggregate::aggregate_all(known);
  for (const auto& [vid, n] : result.insufficient) warn(vid + " has only " + std::to_string(n) + " annotations; left unlabeled");
  aggregate::apply_labels(corpus, result.labels);
  corpus::save_manifest(corpus, out);
  std::cout << "labeled " << result.labels.size() << " clips\n";
  artifact(out);
  return 0;
}

int cmd_cluster(const fs::path& manifest, int k, const fs::path& out) {
  const auto corpus = corpus::load_manifest(manifest);
  std::map<std::string, std::string> messages;
  for (const auto& c : corpus.clips)
    if (c.message) messages[c.vid] = *c.message;
  const auto vectors = cluster::vectorize(messages);
  const auto clustering = cluster::agglomerate(vectors, k);
  const auto centers = cluster::medoids(clustering.assignment, vectors);
  std::map<int, int> sizes;
  for (const auto& [vid, c] : clustering.assignment) ++sizes[c];
  std::ofstream f(out);
  f << "cluster,medoid_vid,size,mean_distance,message\n";
  char buf[64];
  for (const auto& [c, m] : centers) {
    std::snprintf(buf, sizeof buf, "%.9f", m.mean_distance);
    csv::write_row(f, {std::to_string(c), m.vid, std::to_string(sizes[c]), buf, messages[m.vid]});
  }
  std::cout << centers.size() << " representatives\n";
  artifact(out);
  return 0;
}

int cmd_stats(const fs::path& responses, const fs::path& participants, const fs::path& out, const std::string& results) {
  const auto table = stats::read_responses(responses, participants);
  const auto report = stats::analyze(table);
  for (const auto& w : report.warnings) warn(w);
  std::ofstream md(out);
  stats::write_report_markdown(md, report);
  artifact(out);
  if (!results.empty()) {
    std::ofstream r(results);
    stats::write_results_csv(r, report);
    artifact(results);
  }
  return 0;
}

int cmd_windows(const fs::path& manifest, double p0, std::uint64_t seed, int negatives, const fs::path& out) {
  const auto corpus = corpus::load_manifest(manifest);
  const auto set = windows::extract(corpus.clips, {p0, negatives, seed});
  for (const auto& w : set.warnings) warn(w);
  const auto weights = windows::class_weights(set.windows);
  std::ofstream f(out);
  windows::write_index(f, set.windows, weights);
  std::size_t pos = 0;
  for (const auto& w : set.windows) pos += w.label;
  std::cout << set.windows.size() << " windows (" << pos << " positive)\n";
  artifact(out);
  return 0;
}

void print_progress(const train::EpochRecord& r) {
  if (r.epoch % 25 == 0 || r.epoch == 1) {
    std::fprintf(stderr, "epoch %d loss %.5f val_auc %.4f\n", r.epoch, r.loss, r.val_auc);
  }
}

int cmd_train(const fs::path& manifest, double p0, std::uint64_t seed, const ModelFlags& flags, const fs::path& out,
              bool quiet) {
  const auto corpus = corpus::load_manifest(manifest);
  const auto config = flags.config(p0, seed);
  const auto result = train::run(corpus, config, quiet ? train::Progress{} : train::Progress(print_progress));
  for (const auto& w : result.trained.warnings) warn(w);
  train::save_run(out, result, config, manifest);
  std::printf("train_auc %.6f test_auc %.6f baseline_auc %.6f best_epoch %d\n", result.train_auc, result.eval.auc_model,
              result.eval.auc_baseline, result.trained.best_epoch);
  artifact(out / "model.ckpt");
  artifact(out / "split.json");
  artifact(out / "history.csv");
  return 0;
}

int cmd_eval(const fs::path& ckpt, const std::string& split_name, const std::string& manifest_override, const fs::path& report) {
  const auto saved = train::load_run(ckpt);
  const fs::path manifest = manifest_override.empty() ? saved.manifest : fs::path(manifest_override);
  const auto corpus = corpus::load_manifest(manifest);
  const auto& vids = split_name == "train" ? saved.split.train : split_name == "val" ? saved.split.val : saved.split.test;
  std::vector<corpus::ClipRecord> clips;
  for (const auto& v : vids) clips.push_back(corpus.find(v));
  const auto set = windows::extract(clips, {saved.p0, saved.negatives_per_clip, saved.seed});
  std::vector<std::string> ids;
  for (const auto& w : set.windows) ids.push_back(w.vid);
  const auto table = pipeline::load_clips(corpus, ids, saved.model.encoder, false);
  const auto result = train::evaluate(saved.model, set.windows, table, corpus, saved.p0, saved.seed);
  std::ofstream f(report);
  const train::EvalResult rows[] = {result};
  train::write_eval_csv(f, rows);
  std::printf("auc_model %.6f auc_baseline %.6f n %zu\n", result.auc_model, result.auc_baseline, result.n_test);
  artifact(report);
  return 0;
}

int cmd_sweep(const fs::path& manifest, const std::string& p0_list, std::uint64_t seed, const ModelFlags& flags,
              const fs::path& report) {
  const auto corpus = corpus::load_manifest(manifest);
  const auto p0s = parse_list(p0_list);
  const auto result = train::threshold_sweep(corpus, p0s, flags.config(p0s.front(), seed));
  for (const auto& w : result.warnings) warn(w);
  std::ofstream f(report);
  train::write_eval_csv(f, result.results);
  train::write_eval_csv(std::cout, result.results);
  artifact(report);
  return 0;
}

annotation::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(annotation::ServerConfig config) {
  if (config.manifest.empty()) throw Error(Errc::invalid_argument, "serve needs a manifest (--manifest or XNEC_MANIFEST)", "manifest");
  annotation::AnnotationService service(corpus::load_manifest(config.manifest), config.log, config.seed, config.annotators);
  annotation::HttpServer server(service);
  const int port = server.bind(config.host, config.port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on http://" << config.host << ":" << port << "\n" << std::flush;
  server.run();
  g_server = nullptr;
  return 0;
}

int cmd_fixture(const fs::path& out, int clips, std::uint64_t seed) {
  fixture::Options o;
  o.clips = clips;
  o.seed = seed;
  const auto s = fixture::generate(out, o);
  artifact(s.clips_csv);
  artifact(s.flags_csv);
  artifact(s.annotations_csv);
  artifact(s.ratings_csv);
  artifact(s.participants_csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explanation-necessity pipeline for autonomous-vehicle explanations"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option values");
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every stochastic stage")->envname("XNEC_SEED");

  std::string manifest, out, flags_path, report, annotations, responses, participants, results, ckpt, split = "test";
  std::string clips_csv, p0_list = "0.5,0.6,0.7";
  double p0 = 0.5;
  int k = 38, negatives = 1, n_clips = 12;
  bool likert = false, quiet = false;
  ModelFlags mflags;

  auto add_manifest = [&](CLI::App* c) {
    return c->add_option("--manifest", manifest, "Corpus manifest")->envname("XNEC_MANIFEST")->required();
  };
  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", seed, "Seed")->envname("XNEC_SEED"); };

  auto* ingest = app.add_subcommand("ingest", "Resample raw clips to 10 Hz and write a manifest");
  ingest->add_option("--clips", clips_csv, "CSV vid,video,gaze,telemetry")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", out, "Corpus directory")->required();

  auto* filter = app.add_subcommand("filter", "Drop clips that violate the corpus assumptions");
  add_manifest(filter);
  filter->add_option("--flags", flags_path, "CSV vid,violation")->required()->check(CLI::ExistingFile);
  filter->add_option("--out", out, "Filtered manifest")->required();
  filter->add_option("--report", report, "Per-clip assumption report CSV");

  auto* serve = app.add_subcommand("serve", "Run the annotation service");
  std::string serve_config, serve_host, serve_log;
  int serve_port = -1;
  std::vector<std::string> serve_annotators;
  bool serve_seed_set = false;
  serve->add_option("--service-config", serve_config, "Service JSON config");
  serve->add_option("--manifest", manifest, "Corpus manifest");
  serve->add_option("--host", serve_host, "Bind address");
  serve->add_option("--port", serve_port, "Port (0 picks a free one)");
  serve->add_option("--log", serve_log, "Annotation event log");
  serve->add_option("--annotator", serve_annotators, "Registered annotator id (repeatable)");
  serve->add_option("--seed", seed, "Queue seed")->each([&](const std::string&) { serve_seed_set = true; });

  auto* agg = app.add_subcommand("aggregate", "Aggregate annotations into clip labels");
  add_manifest(agg);
  agg->add_option("--annotations", annotations, "Annotation CSV")->required()->check(CLI::ExistingFile);
  agg->add_option("--out", out, "Labeled manifest")->required();
  agg->add_flag("--likert", likert, "Scores are 1..10 ratings");

  auto* clus = app.add_subcommand("cluster", "Cluster explanation messages and pick representatives");
  add_manifest(clus);
  clus->add_option("--k", k, "Number of clusters")->check(CLI::PositiveNumber);
  clus->add_option("--out", out, "Representatives CSV")->required();

  auto* st = app.add_subcommand("stats", "Passenger-study statistics");
  st->add_option("--responses", responses, "Ratings CSV")->required()->check(CLI::ExistingFile);
  st->add_option("--participants", participants, "Participants CSV")->required()->check(CLI::ExistingFile);
  st->add_option("--out", out, "Markdown report")->required();
  st->add_option("--results", results, "Machine-readable results CSV");

  auto* win = app.add_subcommand("windows", "Emit the labeled window index");
  add_manifest(win);
  win->add_option("--p0", p0, "Label threshold")->check(CLI::Range(0.0, 1.0));
  add_seed(win);
  win->add_option("--negatives-per-clip", negatives, "Negative windows per low-score clip");
  win->add_option("--out", out, "Window index CSV")->required();

  auto* tr = app.add_subcommand("train", "Train one model");
  add_manifest(tr);
  tr->add_option("--p0", p0, "Label threshold")->check(CLI::Range(0.0, 1.0));
  add_seed(tr);
  tr->add_option("--out", out, "Checkpoint directory")->required();
  tr->add_flag("--quiet", quiet, "No per-epoch progress");
  mflags.add(tr);

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--ckpt", ckpt, "Checkpoint directory")->required();
  ev->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  ev->add_option("--manifest", manifest, "Override the manifest recorded at training time")->envname("XNEC_MANIFEST");
  ev->add_option("--report", report, "Eval CSV")->required();

  auto* sw = app.add_subcommand("sweep", "Train and evaluate one model per p0");
  add_manifest(sw);
  sw->add_option("--p0", p0_list, "Comma-separated thresholds");
  add_seed(sw);
  sw->add_option("--report", report, "Eval CSV")->required();
  mflags.add(sw);

  auto* fx = app.add_subcommand("fixture", "Generate the synthetic corpus");
  fx->add_option("--out", out, "Output directory")->required();
  fx->add_option("--clips", n_clips, "Number of clips")->check(CLI::PositiveNumber);
  add_seed(fx);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    CLI::App* sub = nullptr;
    for (auto* s : app.get_subcommands()) sub = s;
    std::cerr << (sub ? sub->help() : app.help());
    return 2;
  }

  try {
    if (*ingest) return cmd_ingest(clips_csv, out);
    if (*filter) return cmd_filter(manifest, flags_path, out, report);
    if (*agg) return cmd_aggregate(manifest, annotations, out, likert);
    if (*clus) return cmd_cluster(manifest, k, out);
    if (*st) return cmd_stats(responses, participants, out, results);
    if (*win) return cmd_windows(manifest, p0, seed, negatives, out);
    if (*tr) return cmd_train(manifest, p0, seed, mflags, out, quiet);
    if (*ev) return cmd_eval(ckpt, split, manifest, report);
    if (*sw) return cmd_sweep(manifest, p0_list, seed, mflags, report);
    if (*fx) return cmd_fixture(out, n_clips, seed);
    if (*serve) {
      auto config = annotation::load_server_config(serve_config.empty() ? std::nullopt
                                                                        : std::optional<fs::path>(serve_config));
      if (!manifest.empty()) config.manifest = manifest;
      if (!serve_host.empty()) config.host = serve_host;
      if (serve_port >= 0) config.port = serve_port;
      if (!serve_log.empty()) config.log = serve_log;
      if (!serve_annotators.empty()) config.annotators = serve_annotators;
      if (serve_seed_set) config.seed = seed;
      return cmd_serve(config);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what();
    if (!e.field().empty()) std::cerr << " [field " << e.field() << "]";
    std::cerr << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
