#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "xnec/corpus.hpp"

namespace xnec::aggregate {

// One annotator's recorded explanation moment for one clip.
struct AnnotationEvent {
  std::string vid;
  std::string annotator_id;
  double moment = 0.0;  // seconds into the clip
  double score = 0.0;   // [0, 1]
  std::string explanation;

  bool operator==(const AnnotationEvent&) const = default;
};

struct AggregatedLabel {
  double necessity_score = 0.0;
  corpus::Interval interval;
  std::vector<std::string> contributing_ids;  // sorted
  std::string message;

  bool operator==(const AggregatedLabel&) const = default;
};

inline constexpr std::size_t kMinEvents = 3;

// Mean after discarding exactly one highest and one lowest score.
// Throws Errc::arity for fewer than three scores.
double truncated_mean(std::span<const double> scores);

// (earliest moment, latest moment) over events that must share one vid.
corpus::Interval build_interval(std::span<const AnnotationEvent> events);

// Truncated-mean score, moment interval, and the canonical message: the
// explanation of the annotator whose score is nearest the aggregate (ties go
// to the lexicographically smallest annotator id).
AggregatedLabel aggregate_clip(std::span<const AnnotationEvent> events);

// Affine map of a 1..10 Likert rating onto [0, 1].
double likert_to_unit(double rating);

// CSV `vid,annotator_id,moment,score,explanation`. With `likert_scale` the
// score column holds 1..10 ratings and is mapped onto [0, 1].
std::vector<AnnotationEvent> read_annotations(const std::filesystem::path& path, bool likert_scale = false);
std::vector<AnnotationEvent> parse_annotations(std::string_view text, bool likert_scale = false);
void write_annotations(std::ostream& out, std::span<const AnnotationEvent> events);

// Throws Errc::validation naming the field.
void validate_event(const AnnotationEvent& event);

struct AggregateResult {
  std::map<std::string, AggregatedLabel> labels;         // vids with >= kMinEvents
  std::map<std::string, std::size_t> insufficient;       // vid -> event count below kMinEvents
};

// Groups by vid. Duplicate (vid, annotator) rows keep the last one.
AggregateResult aggregate_all(std::span<const AnnotationEvent> events);

// Writes labels into matching clips (score, interval, message) and
// re-validates them. Throws Errc::unknown_id for labels without a clip.
void apply_labels(corpus::Corpus& corpus, const std::map<std::string, AggregatedLabel>& labels);

}  // namespace xnec::aggregate
