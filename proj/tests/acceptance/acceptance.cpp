// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails. Needs the xnec binary (XNEC_BIN) for the end-to-end parts.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "proc.hpp"
#include "support.hpp"
#include "xnec/aggregate.hpp"
#include "xnec/cluster.hpp"
#include "xnec/corpus.hpp"
#include "xnec/error.hpp"
#include "xnec/model/necessity_model.hpp"
#include "xnec/random.hpp"
#include "xnec/studystats.hpp"
#include "xnec/trainer.hpp"
#include "xnec/windows.hpp"

// After Eigen: resolv.h, pulled in by httplib, defines _res.
#include <httplib.h>

#ifndef XNEC_BIN
#error "XNEC_BIN must point at the xnec executable"
#endif

namespace fs = std::filesystem;
using namespace xnec;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string bin() { return XNEC_BIN; }

// --- shared fixture corpus ------------------------------------------------

struct FixtureCorpus {
  fs::path manifest;  // labeled
  std::string error;
};

// Builds fixture -> ingest -> filter -> aggregate with the CLI, once.
const FixtureCorpus& fixture_corpus(const test::TempDir& work) {
  static std::optional<FixtureCorpus> cached;
  if (cached) return *cached;
  FixtureCorpus fc;
  const fs::path d = work.path() / "fixture48";
  const std::string log = (work.path() / "fixture48.log").string();
  const std::vector<std::vector<std::string>> steps = {
      {bin(), "fixture", "--out", (d / "raw").string(), "--clips", "48", "--seed", "7"},
      {bin(), "ingest", "--clips", (d / "raw/clips.csv").string(), "--out", (d / "corpus").string()},
      {bin(), "filter", "--manifest", (d / "corpus/manifest.json").string(), "--flags", (d / "raw/flags.csv").string(),
       "--out", (d / "corpus/filtered.json").string()},
      {bin(), "aggregate", "--manifest", (d / "corpus/filtered.json").string(), "--annotations",
       (d / "raw/annotations.csv").string(), "--out", (d / "corpus/labeled.json").string()},
  };
  for (const auto& s : steps) {
    if (test::run_process(s, log) != 0) {
      fc.error = "'" + s[1] + "' failed, see " + log;
      break;
    }
  }
  fc.manifest = d / "corpus/labeled.json";
  cached = fc;
  return *cached;
}

// --- statistics -------------------------------------------------------------

std::vector<double> permutation_ranks(Rng& rng, int k) {
  std::vector<double> r(k);
  std::iota(r.begin(), r.end(), 1.0);
  for (int i = k; i > 1; --i) std::swap(r[i - 1], r[windows::uniform_index(rng, i)]);
  return r;
}

Outcome statistics_oracle() {
  const auto t0 = Clock::now();
  Rng rng = make_rng(101);
  double worst_pb = 0.0, worst_f = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 3 + windows::uniform_index(rng, 60);
    std::vector<int> b(n);
    std::vector<double> bd(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      b[i] = i < 2 ? static_cast<int>(i) : static_cast<int>(rng() & 1);
      bd[i] = b[i];
      y[i] = 5.0 * uniform01(rng) + b[i];
    }
    worst_pb = std::max(worst_pb, std::abs(stats::point_biserial(b, y) - stats::pearson(bd, y)));

    // Closed form for untied rankings: 12 / (n k (k+1)) sum R_j^2 - 3 n (k+1).
    const int subjects = 2 + static_cast<int>(windows::uniform_index(rng, 30));
    const int k = 3 + static_cast<int>(windows::uniform_index(rng, 4));
    std::vector<std::vector<double>> ranks;
    std::vector<double> sums(k, 0.0);
    for (int i = 0; i < subjects; ++i) {
      ranks.push_back(permutation_ranks(rng, k));
      for (int j = 0; j < k; ++j) sums[j] += ranks.back()[j];
    }
    double ss = 0.0;
    for (double s : sums) ss += s * s;
    const double closed = 12.0 / (subjects * k * (k + 1.0)) * ss - 3.0 * subjects * (k + 1.0);
    worst_f = std::max(worst_f, std::abs(stats::friedman(ranks).statistic - closed));
  }
  const double elapsed = seconds_since(t0);
  return {worst_pb <= 1e-12 && worst_f <= 1e-9 && elapsed < 10.0,
          "max |pb - pearson| " + fmt("%.2e", worst_pb) + ", max |friedman - closed form| " + fmt("%.2e", worst_f) +
              ", " + fmt("%.2f s", elapsed)};
}

// --- aggregation --------------------------------------------------------------

Outcome aggregation_oracle() {
  Rng rng = make_rng(202);
  int mismatches = 0, bad_intervals = 0;
  for (int t = 0; t < 10000; ++t) {
    std::vector<aggregate::AnnotationEvent> events;
    std::vector<double> scores;
    double lo = 1e9, hi = -1e9;
    for (int a = 0; a < 5; ++a) {
      const double s = uniform01(rng), m = 10.0 * uniform01(rng);
      events.push_back({"v", "a" + std::to_string(a), m, s, "msg " + std::to_string(a)});
      scores.push_back(s);
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
    auto sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    const double oracle = (sorted[1] + sorted[2] + sorted[3]) / 3.0;
    if (aggregate::truncated_mean(scores) != oracle) ++mismatches;
    const auto label = aggregate::aggregate_clip(events);
    if (label.necessity_score != oracle) ++mismatches;
    if (label.interval.start != lo || label.interval.end != hi) ++bad_intervals;
  }
  return {mismatches == 0 && bad_intervals == 0,
          "10000 sets, " + std::to_string(mismatches) + " score mismatches, " + std::to_string(bad_intervals) +
              " interval mismatches"};
}

// --- AUC -------------------------------------------------------------------------

Outcome auc_oracle() {
  Rng rng = make_rng(303);
  int mismatches = 0, complement = 0;
  for (int t = 0; t < 500; ++t) {
    std::vector<double> s(50), neg(50);
    std::vector<int> y(50);
    for (int i = 0; i < 50; ++i) {
      // Every other instance on a coarse grid so ties are common.
      s[i] = t % 2 ? std::floor(8.0 * uniform01(rng)) : uniform01(rng);
      neg[i] = -s[i];
      y[i] = i < 2 ? i : static_cast<int>(rng() & 1);
    }
    std::uint64_t twice = 0, n1 = 0, n0 = 0;
    for (int i = 0; i < 50; ++i) (y[i] ? n1 : n0)++;
    for (int i = 0; i < 50; ++i)
      for (int j = 0; j < 50; ++j)
        if (y[i] == 1 && y[j] == 0) twice += s[i] > s[j] ? 2 : s[i] == s[j] ? 1 : 0;
    const double brute = static_cast<double>(twice) / 2.0 / (static_cast<double>(n1) * static_cast<double>(n0));
    const double auc = train::roc_auc(s, y);
    if (auc != brute) ++mismatches;
    if (auc + train::roc_auc(neg, y) != 1.0) ++complement;
  }
  return {mismatches == 0 && complement == 0,
          "500 instances, " + std::to_string(mismatches) + " brute-force mismatches, " + std::to_string(complement) +
              " complement failures"};
}

// --- clustering -------------------------------------------------------------------

std::map<std::string, std::string> random_messages(Rng& rng, int n) {
  static const char* vocab[] = {"car",  "stop", "light", "red",   "turn",  "left", "right", "slow",
                                "lane", "merge", "ahead", "brake", "truck", "bike", "yield", "green"};
  std::map<std::string, std::string> out;
  for (int i = 0; i < n; ++i) {
    const int len = static_cast<int>(windows::uniform_index(rng, 6));  // zero-length messages included
    std::string text;
    for (int w = 0; w < len; ++w) text += std::string(w ? " " : "") + vocab[windows::uniform_index(rng, 16)];
    char vid[16];
    std::snprintf(vid, sizeof vid, "m%03d", i);
    out[vid] = text;
  }
  return out;
}

Outcome clustering_checks(const test::TempDir& work) {
  std::vector<std::string> problems;
  Rng rng = make_rng(404);
  int medoid_checks = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 3 + static_cast<int>(windows::uniform_index(rng, 40));
    const auto vectors = cluster::vectorize(random_messages(rng, n));
    const int k = 1 + static_cast<int>(windows::uniform_index(rng, n));
    const auto c = cluster::agglomerate(vectors, k);
    for (std::size_t i = 1; i < c.dendrogram.merges.size(); ++i) {
      if (c.dendrogram.merges[i].distance < c.dendrogram.merges[i - 1].distance - 1e-12) {
        problems.push_back("merge distances decrease in corpus " + std::to_string(t));
        break;
      }
    }
    // Medoid against brute force over the full distance matrix.
    const auto d = cluster::distance_matrix(vectors);
    const auto med = cluster::medoids(c.assignment, vectors);
    for (const auto& [cid, m] : med) {
      std::string best;
      double best_mean = 1e9;
      for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (c.assignment.at(vectors[i].vid) != cid) continue;
        double sum = 0.0;
        int size = 0;
        for (std::size_t j = 0; j < vectors.size(); ++j) {
          if (c.assignment.at(vectors[j].vid) != cid) continue;
          sum += d[i][j];
          ++size;
        }
        const double mean = sum / size;
        if (mean < best_mean - 1e-12) {
          best_mean = mean;
          best = vectors[i].vid;
        }
      }
      ++medoid_checks;
      if (best != m.vid) problems.push_back("medoid differs from brute force in corpus " + std::to_string(t));
    }
  }

  std::map<std::string, std::string> planted;
  const char* a[] = {"pedestrian crossing the road ahead", "a pedestrian is crossing ahead",
                     "stopping for the pedestrian crossing", "pedestrian on the road crossing now"};
  const char* b[] = {"traffic light turned red", "red light at the intersection", "the light is red so we stop",
                     "waiting for the red traffic light"};
  for (int i = 0; i < 4; ++i) {
    planted["a" + std::to_string(i)] = a[i];
    planted["b" + std::to_string(i)] = b[i];
  }
  const auto pc = cluster::agglomerate(cluster::vectorize(planted), 2);
  for (int i = 0; i < 4; ++i) {
    if (pc.assignment.at("a" + std::to_string(i)) != pc.assignment.at("a0") ||
        pc.assignment.at("b" + std::to_string(i)) != pc.assignment.at("b0") ||
        pc.assignment.at("a0") == pc.assignment.at("b0")) {
      problems.push_back("planted two-cluster set not recovered");
      break;
    }
  }

  std::size_t reps = 0, messages_n = 0;
  const auto& fc = fixture_corpus(work);
  if (!fc.error.empty()) {
    problems.push_back(fc.error);
  } else {
    const auto corpus = corpus::load_manifest(fc.manifest);
    std::map<std::string, std::string> messages;
    for (const auto& c : corpus.clips)
      if (c.message) messages[c.vid] = *c.message;
    messages_n = messages.size();
    const auto vectors = cluster::vectorize(messages);
    const auto c = cluster::agglomerate(vectors, 38);
    reps = cluster::medoids(c.assignment, vectors).size();
    if (reps != 38) problems.push_back("fixture gave " + std::to_string(reps) + " representatives");
  }
  std::string detail = "100 random corpora, " + std::to_string(medoid_checks) + " medoids checked, fixture " +
                       std::to_string(messages_n) + " messages -> " + std::to_string(reps) + " representatives";
  if (!problems.empty()) detail += "; " + problems.front();
  return {problems.empty(), detail};
}

// --- windows -------------------------------------------------------------------------

Outcome window_labeling(const test::TempDir& work) {
  const auto& fc = fixture_corpus(work);
  if (!fc.error.empty()) return {false, fc.error};
  const auto corpus = corpus::load_manifest(fc.manifest);
  std::map<std::string, const corpus::ClipRecord*> by_vid;
  for (const auto& c : corpus.clips) by_vid[c.vid] = &c;
  std::size_t previous = SIZE_MAX;
  bool monotone = true;
  std::size_t inconsistent = 0;
  std::string counts;
  for (double p0 : {0.5, 0.6, 0.7}) {
    const auto set = windows::extract(corpus.clips, {p0, 1, 7});
    std::size_t pos = 0;
    for (const auto& w : set.windows) {
      const auto& clip = *by_vid.at(w.vid);
      // Re-derived from the manifest alone: end time inside the interval and score >= p0.
      bool ok = windows::label_consistent(w, clip, p0);
      if (w.label == 1) {
        const double t = w.end_frame / 10.0;
        ok = ok && clip.necessity_score && *clip.necessity_score >= p0 && clip.explanation_interval &&
             clip.explanation_interval->start <= t + 1e-9 && t <= clip.explanation_interval->end + 1e-9;
        ++pos;
      }
      if (!ok) ++inconsistent;
    }
    monotone = monotone && pos <= previous;
    previous = pos;
    counts += (counts.empty() ? "" : ", ") + fmt("p0=%.1f: ", p0) + std::to_string(pos) + " positive";
  }
  return {monotone && inconsistent == 0 && previous > 0,
          counts + "; " + std::to_string(inconsistent) + " inconsistent windows"};
}

// --- model numerics -----------------------------------------------------------------

Outcome model_numerics() {
  using namespace xnec::model;
  std::vector<std::string> notes;
  bool pass = true;

  // Head gradients against central differences, eps = 1e-3.
  HeadConfig hc;
  hc.input = 6;
  hc.hidden = {5, 4};
  Rng init = make_rng(505);
  Head head(hc, init);
  Rng rng = make_rng(506);
  Matrix x(6, 10);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = 2.0 * uniform01(rng) - 1.0;
  Vector y(10);
  for (int i = 0; i < 10; ++i) y(i) = i % 3 == 0;
  auto loss = [&] {
    Rng d = make_rng(9);
    const Matrix z = head.forward(x, true, &d);
    double s = 0.0;
    for (Eigen::Index i = 0; i < z.cols(); ++i) {
      const double v = z(0, i);
      s += std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))) - y(i) * v;
    }
    return s / static_cast<double>(z.cols());
  };
  for (Parameter* p : head.parameters()) p->zero_grad();
  {
    Head::Cache cache;
    Rng d = make_rng(9);
    const Matrix z = head.forward(x, true, &d, &cache);
    Vector dz;
    bce_with_logits(z.row(0).transpose(), y, &dz);
    head.backward(dz.transpose(), cache);
  }
  double worst = 0.0;
  for (Parameter* p : head.parameters()) {
    const Matrix analytic = p->grad;
    Matrix numeric(analytic.rows(), analytic.cols());
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double keep = p->value(i);
      p->value(i) = keep + 1e-3;
      const double up = loss();
      p->value(i) = keep - 1e-3;
      const double down = loss();
      p->value(i) = keep;
      numeric(i) = (up - down) / 2e-3;
    }
    worst = std::max(worst, (analytic - numeric).norm() / std::max(analytic.norm() + numeric.norm(), 1e-12));
  }
  pass = pass && worst <= 1e-4;
  notes.push_back("head grad rel. err " + fmt("%.2e", worst));

  // Batch independence in evaluation mode after a few training steps.
  ModelConfig mc;
  mc.init_seed = 3;
  NecessityModel m(mc);
  const int cells = mc.encoder.cells();
  Matrix feats(FovealEncoder::kChannels, 90 * cells);
  for (Eigen::Index i = 0; i < feats.size(); ++i) feats(i) = uniform01(rng);
  auto refs_for = [&](const std::vector<int>& firsts) {
    std::vector<WindowRef> r;
    for (int f : firsts) r.push_back({&feats, f, std::sin(f)});
    return r;
  };
  for (int step = 0; step < 3; ++step) {
    Vector labels(4);
    labels << 1, 0, 1, 0;
    Rng d = make_rng(step);
    m.train_step(m.make_batch(refs_for({0, 12, 25, 50})), labels, d);
  }
  const std::vector<int> firsts = {1, 9, 17, 33, 40, 49, 50, 5};
  const Vector together = m.predict(m.make_batch(refs_for(firsts)));
  double gap = 0.0;
  for (std::size_t i = 0; i < firsts.size(); ++i) {
    gap = std::max(gap, std::abs(m.predict(m.make_batch(refs_for({firsts[i]})))(0) - together(static_cast<Eigen::Index>(i))));
  }
  pass = pass && gap <= 1e-6;
  notes.push_back("batch gap " + fmt("%.2e", gap));

  for (auto& l : m.head.linears) {
    l.weight.value.setZero();
    if (l.has_bias()) l.bias.value.setZero();
  }
  const Vector half = m.predict(m.make_batch(refs_for(firsts)));
  const bool exact = (half.array() == 0.5).all();
  pass = pass && exact;
  notes.push_back(exact ? "zero head = 0.5 exactly" : "zero head not 0.5");

  std::string detail;
  for (const auto& n : notes) detail += (detail.empty() ? "" : ", ") + n;
  return {pass, detail};
}

// --- learning smoke test ------------------------------------------------------------

Outcome learning_smoke(const test::TempDir& work) {
  const auto& fc = fixture_corpus(work);
  if (!fc.error.empty()) return {false, fc.error};
  const auto corpus = corpus::load_manifest(fc.manifest);
  train::TrainConfig config;  // lr 1e-2, dropout 0.7, full batch, 300 epochs
  config.seed = 7;
  config.p0 = 0.5;
  const auto t0 = Clock::now();
  const auto foveal = train::run(corpus, config);
  train::TrainConfig plain_config = config;
  plain_config.model.encoder.foveal = false;
  const auto plain = train::run(corpus, plain_config);

  std::vector<int> y;
  for (const auto& w : foveal.test.windows) y.push_back(w.label);
  double baseline = 0.0;
  const int seeds = 200;
  for (int s = 0; s < seeds; ++s) baseline += train::roc_auc(train::random_baseline(y.size(), 1000 + s), y);
  baseline /= seeds;

  const bool pass = foveal.train_auc >= 0.95 && foveal.eval.auc_model >= 0.85 && std::abs(baseline - 0.5) <= 0.05 &&
                    foveal.eval.auc_model >= plain.eval.auc_model;
  return {pass, "train AUC " + fmt("%.4f", foveal.train_auc) + ", test AUC " + fmt("%.4f", foveal.eval.auc_model) +
                    " on " + std::to_string(foveal.eval.n_test) + " windows, random baseline mean " +
                    fmt("%.4f", baseline) + " over 200 seeds, plain test AUC " + fmt("%.4f", plain.eval.auc_model) +
                    ", " + fmt("%.0f s", seconds_since(t0))};
}

// --- determinism -----------------------------------------------------------------------

Outcome determinism(const test::TempDir& work) {
  std::string csv[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path d = work.path() / ("determinism" + std::to_string(run));
    const std::string log = (d.string() + ".log");
    const std::vector<std::vector<std::string>> steps = {
        {bin(), "fixture", "--out", (d / "raw").string(), "--clips", "12", "--seed", "5"},
        {bin(), "ingest", "--clips", (d / "raw/clips.csv").string(), "--out", (d / "corpus").string()},
        {bin(), "filter", "--manifest", (d / "corpus/manifest.json").string(), "--flags", (d / "raw/flags.csv").string(),
         "--out", (d / "corpus/filtered.json").string()},
        {bin(), "aggregate", "--manifest", (d / "corpus/filtered.json").string(), "--annotations",
         (d / "raw/annotations.csv").string(), "--out", (d / "corpus/labeled.json").string()},
        {bin(), "train", "--manifest", (d / "corpus/labeled.json").string(), "--seed", "5", "--quiet", "--out",
         (d / "run").string()},
        {bin(), "eval", "--ckpt", (d / "run").string(), "--report", (d / "eval.csv").string()},
    };
    for (const auto& s : steps) {
      if (test::run_process(s, log) != 0) return {false, "'" + s[1] + "' failed, see " + log};
    }
    csv[run] = test::slurp(d / "eval.csv");
  }
  const bool same = csv[0] == csv[1] && !csv[0].empty();
  std::string row = csv[0].substr(csv[0].find('\n') + 1);
  if (!row.empty() && row.back() == '\n') row.pop_back();
  return {same, same ? "eval CSVs byte-identical (" + row + ")" : "eval CSVs differ"};
}

// --- service durability ------------------------------------------------------------------

using Pair = std::pair<std::string, std::string>;

struct Server {
  test::Child child;
  int port = 0;
};

std::optional<Server> start_server(const fs::path& manifest, const fs::path& log, const std::string& errlog,
                                   const std::vector<std::string>& annotators) {
  std::vector<std::string> argv = {bin(), "serve", "--manifest", manifest.string(), "--log", log.string(),
                                   "--port", "0", "--seed", "11"};
  for (const auto& a : annotators) {
    argv.push_back("--annotator");
    argv.push_back(a);
  }
  Server s{test::spawn(argv, errlog), 0};
  const std::string line = s.child.read_line();
  const auto colon = line.rfind(':');
  if (line.rfind("listening on", 0) != 0 || colon == std::string::npos) {
    s.child.kill_and_wait();
    return std::nullopt;
  }
  s.port = std::stoi(line.substr(colon + 1));
  return s;
}

nlohmann::json event_json(const aggregate::AnnotationEvent& e) {
  return {{"vid", e.vid}, {"annotator_id", e.annotator_id}, {"moment", e.moment}, {"score", e.score},
          {"explanation", e.explanation}};
}

struct DurabilityState {
  std::map<Pair, aggregate::AnnotationEvent> acked;
  std::map<Pair, std::vector<aggregate::AnnotationEvent>> maybe;  // sent, not acknowledged
  std::size_t lost = 0;
  std::size_t phantom = 0;
  std::size_t recovered_unacked = 0;
};

// Compares the server's export with what was acknowledged.
bool reconcile(httplib::Client& cli, DurabilityState& st) {
  auto res = cli.Get("/export.csv");
  if (!res || res->status != 200) return false;
  std::map<Pair, aggregate::AnnotationEvent> stored;
  for (const auto& e : aggregate::parse_annotations(res->body)) stored[{e.vid, e.annotator_id}] = e;
  std::set<Pair> keys;
  for (const auto& [k, v] : st.acked) keys.insert(k);
  for (const auto& [k, v] : st.maybe) keys.insert(k);
  for (const auto& [k, v] : stored) keys.insert(k);
  for (const auto& k : keys) {
    const auto s = stored.find(k);
    const auto a = st.acked.find(k);
    const auto m = st.maybe.find(k);
    bool explained = false;
    if (s == stored.end()) {
      explained = a == st.acked.end();
      if (!explained) ++st.lost;
    } else {
      if (a != st.acked.end() && a->second == s->second) explained = true;
      if (!explained && m != st.maybe.end() &&
          std::find(m->second.begin(), m->second.end(), s->second) != m->second.end()) {
        explained = true;
        ++st.recovered_unacked;
      }
      if (!explained) (a == st.acked.end() ? st.phantom : st.lost)++;
      st.acked[k] = s->second;
    }
  }
  st.maybe.clear();
  return true;
}

Outcome service_durability(const test::TempDir& work) {
  const auto& fc = fixture_corpus(work);
  if (!fc.error.empty()) return {false, fc.error};
  const fs::path log = work.path() / "durability/annotations.log";
  fs::create_directories(log.parent_path());
  const std::string errlog = (work.path() / "durability/server.log").string();
  const std::vector<std::string> annotators = {"ann1", "ann2", "ann3", "ann4", "ann5"};

  DurabilityState st;
  Rng rng = make_rng(606);
  std::size_t requests = 0, in_flight_acked = 0, in_flight_lost = 0;
  int counter = 0;
  auto make_event = [&](const std::string& vid, const std::string& who) {
    aggregate::AnnotationEvent e{vid, who, 9.0 * uniform01(rng), uniform01(rng), "note " + std::to_string(counter++)};
    return e;
  };
  // Chooses the next request for a random annotator: POST for the assigned
  // clip, or PUT on an annotated one once the queue is exhausted.
  struct Request {
    bool post = true;
    aggregate::AnnotationEvent event;
  };
  auto plan = [&](httplib::Client& cli) -> std::optional<Request> {
    const std::string who = annotators[windows::uniform_index(rng, annotators.size())];
    auto next = cli.Get("/session/" + who + "/next");
    if (!next || next->status != 200) return std::nullopt;
    const auto j = nlohmann::json::parse(next->body);
    if (!j.at("done").get<bool>()) return Request{true, make_event(j.at("vid"), who)};
    std::vector<std::string> mine;
    for (const auto& [k, v] : st.acked)
      if (k.second == who) mine.push_back(k.first);
    if (mine.empty()) return std::nullopt;
    return Request{false, make_event(mine[windows::uniform_index(rng, mine.size())], who)};
  };
  auto send = [](httplib::Client& cli, const Request& r) -> int {
    httplib::Result res = r.post ? cli.Post("/annotations", event_json(r.event).dump(), "application/json")
                                 : cli.Put("/annotations/" + r.event.vid + "/" + r.event.annotator_id,
                                           event_json(r.event).dump(), "application/json");
    return res ? res->status : -1;
  };

  for (int crash = 0; crash < 100; ++crash) {
    auto server = start_server(fc.manifest, log, errlog, annotators);
    if (!server) return {false, "server did not start at crash point " + std::to_string(crash)};
    httplib::Client cli("127.0.0.1", server->port);
    cli.set_connection_timeout(5);
    if (!reconcile(cli, st)) return {false, "export failed after restart " + std::to_string(crash)};

    const int sequential = static_cast<int>(windows::uniform_index(rng, 4));
    for (int i = 0; i < sequential; ++i) {
      const auto r = plan(cli);
      if (!r) continue;
      const Pair key{r->event.vid, r->event.annotator_id};
      st.maybe[key].push_back(r->event);
      const int status = send(cli, *r);
      ++requests;
      if (status == 200 || status == 201) {
        st.acked[key] = r->event;
        st.maybe.erase(key);
      }
    }
    // One request in flight while the process is killed at a random moment.
    const auto r = plan(cli);
    const auto delay = std::chrono::microseconds(windows::uniform_index(rng, 1200));
    if (r) {
      const Pair key{r->event.vid, r->event.annotator_id};
      st.maybe[key].push_back(r->event);
      int status = -1;
      httplib::Client flight("127.0.0.1", server->port);
      std::thread t([&] { status = send(flight, *r); });
      std::this_thread::sleep_for(delay);
      server->child.kill_and_wait(SIGKILL);
      t.join();
      ++requests;
      if (status == 200 || status == 201) {
        st.acked[key] = r->event;
        st.maybe.erase(key);
        ++in_flight_acked;
      } else {
        ++in_flight_lost;
      }
    } else {
      std::this_thread::sleep_for(delay);
      server->child.kill_and_wait(SIGKILL);
    }
  }

  // Final restart: check, finish every queue, then compare aggregations.
  auto server = start_server(fc.manifest, log, errlog, annotators);
  if (!server) return {false, "server did not start after the last crash"};
  httplib::Client cli("127.0.0.1", server->port);
  if (!reconcile(cli, st)) return {false, "final export failed"};
  for (const auto& who : annotators) {
    for (;;) {
      auto next = cli.Get("/session/" + who + "/next");
      if (!next || next->status != 200) return {false, "next failed for " + who};
      const auto j = nlohmann::json::parse(next->body);
      if (j.at("done").get<bool>()) break;
      const auto e = make_event(j.at("vid"), who);
      auto res = cli.Post("/annotations", event_json(e).dump(), "application/json");
      if (!res || res->status != 201) return {false, "completion POST failed"};
      st.acked[{e.vid, e.annotator_id}] = e;
    }
  }
  auto exp = cli.Get("/export.csv");
  server->child.kill_and_wait(SIGTERM);
  if (!exp || exp->status != 200) return {false, "export failed"};
  const bool complete = exp->get_header_value("X-Export-Complete") == "true";
  std::vector<aggregate::AnnotationEvent> memory;
  for (const auto& [k, e] : st.acked) memory.push_back(e);
  const auto from_export = aggregate::aggregate_all(aggregate::parse_annotations(exp->body));
  const auto in_memory = aggregate::aggregate_all(memory);
  const bool equal = from_export.labels == in_memory.labels && !in_memory.labels.empty();

  const bool pass = st.lost == 0 && st.phantom == 0 && complete && equal;
  return {pass, "100 crash points, " + std::to_string(requests) + " writes, " + std::to_string(in_flight_acked) +
                    " in-flight acked before kill, " + std::to_string(in_flight_lost) + " unacked (" +
                    std::to_string(st.recovered_unacked) + " of those durable anyway), lost " +
                    std::to_string(st.lost) + ", unexplained " + std::to_string(st.phantom) + ", export " +
                    (complete ? "complete" : "incomplete") + ", " + std::to_string(in_memory.labels.size()) +
                    " labels " + (equal ? "match" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGPIPE, SIG_IGN);
  const std::string only = argc > 1 ? argv[1] : "";
  test::TempDir work("acceptance");

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"statistics-oracle", statistics_oracle},
      {"aggregation-oracle", aggregation_oracle},
      {"auc-oracle", auc_oracle},
      {"clustering", [&] { return clustering_checks(work); }},
      {"window-labeling", [&] { return window_labeling(work); }},
      {"model-numerics", model_numerics},
      {"learning-smoke", [&] { return learning_smoke(work); }},
      {"determinism", [&] { return determinism(work); }},
      {"service-durability", [&] { return service_durability(work); }},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && only != name) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
