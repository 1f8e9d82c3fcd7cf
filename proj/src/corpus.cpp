#include "xnec/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "xnec/csv.hpp"
#include "xnec/error.hpp"

namespace xnec::corpus {

using nlohmann::json;

const ClipRecord& Corpus::find(const std::string& vid) const {
  for (const auto& clip : clips)
    if (clip.vid == vid) return clip;
  throw Error(Errc::unknown_id, "unknown vid '" + vid + "'", "vid");
}

std::filesystem::path Corpus::resolve(const std::string& relative) const {
  if (relative.empty()) return {};
  std::filesystem::path p(relative);
  return p.is_absolute() ? p : root / p;
}

void validate(const ClipRecord& clip) {
  if (clip.vid.empty()) throw Error(Errc::validation, "clip has empty vid", "vid");
  if (clip.video_path.empty()) throw Error(Errc::validation, clip.vid + ": missing video_path", "video_path");
  if (clip.speed.size() != clip.course.size()) {
    throw Error(Errc::validation, clip.vid + ": speed and course lengths differ", "course");
  }
  for (double v : clip.speed)
    if (!std::isfinite(v)) throw Error(Errc::validation, clip.vid + ": non-finite speed", "speed");
  for (double v : clip.course)
    if (!std::isfinite(v)) throw Error(Errc::validation, clip.vid + ": non-finite course", "course");
  if (clip.necessity_score) {
    const double s = *clip.necessity_score;
    if (!(s >= 0.0 && s <= 1.0)) {
      throw Error(Errc::validation, clip.vid + ": necessity_score outside [0,1]", "necessity_score");
    }
    if (!clip.explanation_interval) {
      throw Error(Errc::validation, clip.vid + ": labeled clip lacks explanation_interval", "explanation_interval");
    }
  }
  if (clip.explanation_interval) {
    const auto& iv = *clip.explanation_interval;
    // Interval endpoints are seconds; allow the last frame's period as slack
    // since moments may be recorded up to the end of playback.
    if (!(iv.start >= 0.0 && iv.start <= iv.end && iv.end <= clip.duration() + 1e-9)) {
      throw Error(Errc::validation, clip.vid + ": explanation_interval outside [0, duration] or reversed",
                  "explanation_interval");
    }
  }
}

const char* to_string(Violation v) {
  switch (v) {
    case Violation::traffic_law_violation: return "traffic-law-violation";
    case Violation::unsafe_action: return "unsafe-action";
    case Violation::no_explanation_moment: return "no-explanation-moment";
    case Violation::corrupt_video: return "corrupt-video";
  }
  return "?";
}

Violation parse_violation(const std::string& code) {
  for (auto v : {Violation::traffic_law_violation, Violation::unsafe_action, Violation::no_explanation_moment,
                 Violation::corrupt_video}) {
    if (code == to_string(v)) return v;
  }
  throw Error(Errc::validation, "unknown violation code '" + code + "'", "violation");
}

std::vector<TelemetrySample> read_telemetry(const std::filesystem::path& path) {
  const auto table = csv::read_table(path, {"timestamp", "speed", "course"});
  const auto ct = table.column("timestamp"), cs = table.column("speed"), cc = table.column("course");
  std::vector<TelemetrySample> samples;
  samples.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    samples.push_back({csv::to_double(row[ct], "timestamp"), csv::to_double(row[cs], "speed"),
                       csv::to_double(row[cc], "course")});
  }
  std::stable_sort(samples.begin(), samples.end(),
                   [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  return samples;
}

namespace {

std::vector<double> interpolate(const std::vector<double>& xs, const std::vector<double>& ys,
                                const std::vector<double>& times) {
  std::vector<double> out;
  out.reserve(times.size());
  std::size_t j = 0;
  for (double t : times) {
    if (t <= xs.front()) {
      out.push_back(ys.front());
      continue;
    }
    if (t >= xs.back()) {
      out.push_back(ys.back());
      continue;
    }
    while (j + 1 < xs.size() && xs[j + 1] < t) ++j;
    if (xs[j + 1] == t) {
      out.push_back(ys[j + 1]);
      continue;
    }
    const double w = (t - xs[j]) / (xs[j + 1] - xs[j]);
    out.push_back(ys[j] + w * (ys[j + 1] - ys[j]));
  }
  return out;
}

void require_samples(const std::vector<TelemetrySample>& samples) {
  if (samples.empty()) throw Error(Errc::empty_telemetry, "telemetry has no samples", "telemetry");
}

}  // namespace

std::vector<double> interpolate_speed(const std::vector<TelemetrySample>& samples, const std::vector<double>& times) {
  require_samples(samples);
  std::vector<double> xs, ys;
  for (const auto& s : samples) {
    xs.push_back(s.timestamp);
    ys.push_back(s.speed);
  }
  return interpolate(xs, ys, times);
}

std::vector<double> interpolate_course(const std::vector<TelemetrySample>& samples, const std::vector<double>& times) {
  require_samples(samples);
  std::vector<double> xs, ys;
  double unwrapped = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i == 0) {
      unwrapped = samples[0].course;
    } else {
      double delta = std::fmod(samples[i].course - samples[i - 1].course, 360.0);
      if (delta > 180.0) delta -= 360.0;
      if (delta < -180.0) delta += 360.0;
      unwrapped += delta;
    }
    xs.push_back(samples[i].timestamp);
    ys.push_back(unwrapped);
  }
  auto out = interpolate(xs, ys, times);
  for (auto& v : out) {
    v = std::fmod(v, 360.0);
    if (v < 0) v += 360.0;
  }
  return out;
}

ClipRecord ingest_clip(const IngestRequest& request, const std::filesystem::path& corpus_dir) {
  if (request.vid.empty()) throw Error(Errc::validation, "ingest: empty vid", "vid");
  require_samples(request.telemetry);
  const auto video = media::resample(media::read_video(request.video));

  ClipRecord clip;
  clip.vid = request.vid;
  const auto video_rel = std::filesystem::path("media") / (request.vid + ".video.xnv");
  media::write_video(corpus_dir / video_rel, video);
  clip.video_path = video_rel.generic_string();

  if (!request.gaze.empty()) {
    auto gaze = media::resample(media::read_video(request.gaze));
    if (gaze.frame_count() != video.frame_count()) {
      throw Error(Errc::corrupt_video, request.vid + ": gaze map has " + std::to_string(gaze.frame_count()) +
                                           " frames after resampling, video has " +
                                           std::to_string(video.frame_count()));
    }
    const auto gaze_rel = std::filesystem::path("media") / (request.vid + ".gaze.xnv");
    media::write_video(corpus_dir / gaze_rel, gaze);
    clip.gazemap_path = gaze_rel.generic_string();
  }

  // Telemetry shares the video's time origin.
  std::vector<double> times = video.timestamps;
  clip.speed = interpolate_speed(request.telemetry, times);
  clip.course = interpolate_course(request.telemetry, times);
  validate(clip);
  return clip;
}

std::vector<FlagEntry> read_flags(const std::filesystem::path& path) {
  const auto table = csv::read_table(path, {"vid", "violation"});
  const auto cv = table.column("vid"), cx = table.column("violation");
  std::vector<FlagEntry> flags;
  for (const auto& row : table.rows) flags.push_back({row[cv], parse_violation(row[cx])});
  return flags;
}

FilterResult filter_corpus(const std::vector<ClipRecord>& clips, const std::vector<FlagEntry>& flags) {
  std::unordered_set<std::string> known;
  for (const auto& c : clips) known.insert(c.vid);
  std::set<std::string> unknown;
  for (const auto& f : flags)
    if (!known.count(f.vid)) unknown.insert(f.vid);
  if (!unknown.empty()) {
    std::string list;
    for (const auto& id : unknown) list += (list.empty() ? "" : ", ") + id;
    throw Error(Errc::unknown_id, "flag file references unknown vids: " + list, "vid");
  }

  FilterResult result;
  for (const auto& clip : clips) {
    AssumptionReport report{clip.vid, true, {}};
    for (const auto& f : flags) {
      if (f.vid != clip.vid) continue;
      if (std::find(report.violated_assumptions.begin(), report.violated_assumptions.end(), f.violation) ==
          report.violated_assumptions.end()) {
        report.violated_assumptions.push_back(f.violation);
      }
    }
    report.passed = report.violated_assumptions.empty();
    if (report.passed) result.kept.push_back(clip);
    result.reports.push_back(std::move(report));
  }
  return result;
}

namespace {

json clip_to_json(const ClipRecord& c) {
  json j;
  j["vid"] = c.vid;
  j["video_path"] = c.video_path;
  j["gazemap_path"] = c.gazemap_path;
  j["speed"] = c.speed;
  j["course"] = c.course;
  j["message"] = c.message ? json(*c.message) : json(nullptr);
  j["necessity_score"] = c.necessity_score ? json(*c.necessity_score) : json(nullptr);
  j["explanation_interval"] =
      c.explanation_interval ? json::array({c.explanation_interval->start, c.explanation_interval->end}) : json(nullptr);
  return j;
}

template <typename T>
T required(const json& j, const char* key, const std::string& vid) {
  if (!j.contains(key)) throw Error(Errc::validation, vid + ": missing field '" + key + "'", key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::validation, vid + ": bad field '" + std::string(key) + "': " + e.what(), key);
  }
}

ClipRecord clip_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::validation, "manifest clip entry is not an object");
  ClipRecord c;
  c.vid = required<std::string>(j, "vid", "?");
  c.video_path = required<std::string>(j, "video_path", c.vid);
  c.gazemap_path = required<std::string>(j, "gazemap_path", c.vid);
  c.speed = required<std::vector<double>>(j, "speed", c.vid);
  c.course = required<std::vector<double>>(j, "course", c.vid);
  if (j.contains("message") && !j["message"].is_null()) c.message = required<std::string>(j, "message", c.vid);
  if (j.contains("necessity_score") && !j["necessity_score"].is_null()) {
    c.necessity_score = required<double>(j, "necessity_score", c.vid);
  }
  if (j.contains("explanation_interval") && !j["explanation_interval"].is_null()) {
    const auto pair = required<std::vector<double>>(j, "explanation_interval", c.vid);
    if (pair.size() != 2) throw Error(Errc::validation, c.vid + ": explanation_interval must have two entries", "explanation_interval");
    c.explanation_interval = Interval{pair[0], pair[1]};
  }
  validate(c);
  return c;
}

}  // namespace

void save_manifest(const Corpus& corpus, const std::filesystem::path& path) {
  json doc;
  doc["schema"] = "xnec-corpus";
  doc["version"] = kManifestVersion;
  doc["frame_rate"] = media::kFrameRate;
  doc["clips"] = json::array();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Media paths stay relative to the manifest, so rebase them when the
  // manifest moves to another directory.
  namespace fs = std::filesystem;
  const fs::path target_dir = fs::weakly_canonical(fs::absolute(path).parent_path());
  const fs::path source_dir = corpus.root.empty() ? target_dir : fs::weakly_canonical(fs::absolute(corpus.root));
  auto rebase = [&](const std::string& rel) {
    if (rel.empty() || fs::path(rel).is_absolute() || source_dir == target_dir) return rel;
    return fs::relative(source_dir / rel, target_dir).generic_string();
  };
  for (auto clip : corpus.clips) {
    clip.video_path = rebase(clip.video_path);
    clip.gazemap_path = rebase(clip.gazemap_path);
    doc["clips"].push_back(clip_to_json(clip));
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write manifest " + path.string());
    out << doc.dump(1) << '\n';
    if (!out) throw Error(Errc::io, "write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Corpus load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::validation, "manifest is not valid JSON: " + std::string(e.what()));
  }
  if (!doc.is_object() || doc.value("schema", "") != "xnec-corpus") {
    throw Error(Errc::validation, "not an xnec corpus manifest: " + path.string(), "schema");
  }
  if (!doc.contains("version") || !doc["version"].is_number_integer() || doc["version"].get<int>() != kManifestVersion) {
    throw Error(Errc::version_mismatch,
                "manifest schema version " + (doc.contains("version") ? doc["version"].dump() : std::string("<none>")) +
                    " is not supported (expected " + std::to_string(kManifestVersion) + ")",
                "version");
  }
  if (!doc.contains("clips") || !doc["clips"].is_array()) throw Error(Errc::validation, "manifest lacks clips", "clips");
  Corpus corpus;
  corpus.root = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  std::unordered_set<std::string> seen;
  for (const auto& entry : doc["clips"]) {
    auto clip = clip_from_json(entry);
    if (!seen.insert(clip.vid).second) throw Error(Errc::validation, "duplicate vid '" + clip.vid + "'", "vid");
    corpus.clips.push_back(std::move(clip));
  }
  return corpus;
}

}  // namespace xnec::corpus
