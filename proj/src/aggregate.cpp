#include "xnec/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "xnec/csv.hpp"
#include "xnec/error.hpp"

namespace xnec::aggregate {

double truncated_mean(std::span<const double> scores) {
  if (scores.size() < 3) {
    throw Error(Errc::arity, "truncated mean needs at least 3 scores, got " + std::to_string(scores.size()));
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (std::size_t i = 1; i + 1 < sorted.size(); ++i) sum += sorted[i];
  const double mean = sum / static_cast<double>(sorted.size() - 2);
  // Rounding can push the mean a hair outside the retained range.
  return std::clamp(mean, sorted[1], sorted[sorted.size() - 2]);
}

corpus::Interval build_interval(std::span<const AnnotationEvent> events) {
  if (events.empty()) throw Error(Errc::arity, "interval needs at least one event");
  corpus::Interval iv{events.front().moment, events.front().moment};
  for (const auto& e : events) {
    if (e.vid != events.front().vid) {
      throw Error(Errc::invalid_argument, "events mix vids '" + events.front().vid + "' and '" + e.vid + "'", "vid");
    }
    iv.start = std::min(iv.start, e.moment);
    iv.end = std::max(iv.end, e.moment);
  }
  return iv;
}

AggregatedLabel aggregate_clip(std::span<const AnnotationEvent> events) {
  if (events.size() < kMinEvents) {
    throw Error(Errc::arity, "aggregation needs at least 3 events, got " + std::to_string(events.size()));
  }
  AggregatedLabel label;
  label.interval = build_interval(events);
  std::vector<double> scores;
  for (const auto& e : events) {
    scores.push_back(e.score);
    label.contributing_ids.push_back(e.annotator_id);
  }
  label.necessity_score = truncated_mean(scores);
  std::sort(label.contributing_ids.begin(), label.contributing_ids.end());

  const AnnotationEvent* best = nullptr;
  for (const auto& e : events) {
    if (!best) {
      best = &e;
      continue;
    }
    const double d = std::abs(e.score - label.necessity_score);
    const double bd = std::abs(best->score - label.necessity_score);
    if (d < bd || (d == bd && e.annotator_id < best->annotator_id)) best = &e;
  }
  label.message = best->explanation;
  return label;
}

double likert_to_unit(double rating) {
  if (!(rating >= 1.0 && rating <= 10.0)) {
    throw Error(Errc::validation, "Likert rating outside 1..10: " + std::to_string(rating), "score");
  }
  return (rating - 1.0) / 9.0;
}

void validate_event(const AnnotationEvent& e) {
  if (e.vid.empty()) throw Error(Errc::validation, "annotation lacks vid", "vid");
  if (e.annotator_id.empty()) throw Error(Errc::validation, "annotation lacks annotator_id", "annotator_id");
  if (!std::isfinite(e.moment) || e.moment < 0.0) throw Error(Errc::validation, "moment must be >= 0", "moment");
  if (!(e.score >= 0.0 && e.score <= 1.0)) throw Error(Errc::validation, "score must lie in [0,1]", "score");
  if (e.explanation.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(Errc::validation, "explanation must be non-empty", "explanation");
  }
}

std::vector<AnnotationEvent> parse_annotations(std::string_view text, bool likert_scale) {
  const auto table = csv::parse_table(text, {"vid", "annotator_id", "moment", "score", "explanation"});
  const auto cv = table.column("vid"), ca = table.column("annotator_id"), cm = table.column("moment"),
             cs = table.column("score"), ce = table.column("explanation");
  std::vector<AnnotationEvent> events;
  for (const auto& row : table.rows) {
    AnnotationEvent e{row[cv], row[ca], csv::to_double(row[cm], "moment"), csv::to_double(row[cs], "score"), row[ce]};
    if (likert_scale) e.score = likert_to_unit(e.score);
    validate_event(e);
    events.push_back(std::move(e));
  }
  return events;
}

std::vector<AnnotationEvent> read_annotations(const std::filesystem::path& path, bool likert_scale) {
  const auto table = csv::read_table(path);
  std::ostringstream text;
  csv::write_row(text, table.header);
  for (const auto& row : table.rows) csv::write_row(text, row);
  return parse_annotations(text.str(), likert_scale);
}

void write_annotations(std::ostream& out, std::span<const AnnotationEvent> events) {
  csv::write_row(out, {"vid", "annotator_id", "moment", "score", "explanation"});
  for (const auto& e : events) {
    std::ostringstream moment, score;
    moment.precision(17);
    score.precision(17);
    moment << e.moment;
    score << e.score;
    csv::write_row(out, {e.vid, e.annotator_id, moment.str(), score.str(), e.explanation});
  }
}

AggregateResult aggregate_all(std::span<const AnnotationEvent> events) {
  std::map<std::string, std::map<std::string, AnnotationEvent>> by_vid;
  for (const auto& e : events) by_vid[e.vid][e.annotator_id] = e;
  AggregateResult result;
  for (const auto& [vid, per_annotator] : by_vid) {
    std::vector<AnnotationEvent> group;
    for (const auto& [id, e] : per_annotator) group.push_back(e);
    if (group.size() < kMinEvents) {
      result.insufficient[vid] = group.size();
      continue;
    }
    result.labels[vid] = aggregate_clip(group);
  }
  return result;
}

void apply_labels(corpus::Corpus& corpus, const std::map<std::string, AggregatedLabel>& labels) {
  std::map<std::string, corpus::ClipRecord*> index;
  for (auto& clip : corpus.clips) index[clip.vid] = &clip;
  for (const auto& [vid, label] : labels) {
    auto it = index.find(vid);
    if (it == index.end()) throw Error(Errc::unknown_id, "label for unknown vid '" + vid + "'", "vid");
    auto& clip = *it->second;
    clip.necessity_score = label.necessity_score;
    clip.explanation_interval = label.interval;
    clip.message = label.message;
    corpus::validate(clip);
  }
}

}  // namespace xnec::aggregate
