#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "xnec/aggregate.hpp"
#include "xnec/corpus.hpp"

namespace xnec::annotation {

using aggregate::AnnotationEvent;

// Append-only JSON-lines log of annotation events. Materialised state keeps
// the latest event per (vid, annotator). Not thread-safe on its own.
class AnnotationStore {
 public:
  // Replays an existing log. A torn final line (crash mid-append) is cut off;
  // damage anywhere else throws Errc::validation.
  explicit AnnotationStore(const std::filesystem::path& log);
  ~AnnotationStore();
  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  // Returns once the line is on stable storage (fsync).
  void put(const AnnotationEvent& event);

  std::optional<AnnotationEvent> get(const std::string& vid, const std::string& annotator) const;
  std::vector<AnnotationEvent> events() const;  // ordered by (vid, annotator)
  std::size_t size() const { return state_.size(); }
  std::size_t count(const std::string& vid) const;
  std::size_t truncated_bytes() const { return truncated_; }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
  std::size_t truncated_ = 0;
  std::map<std::pair<std::string, std::string>, AnnotationEvent> state_;
};

std::string event_to_json(const AnnotationEvent& event);
AnnotationEvent event_from_json(const std::string& text);

struct Assignment {
  bool done = false;
  std::string vid;
  double duration = 0.0;
  std::size_t frame_count = 0;
  std::size_t position = 0;  // clips already annotated by this annotator
  std::size_t total = 0;
};

struct Export {
  std::string csv;  // aggregate module schema
  bool complete = false;
  aggregate::AggregateResult aggregated;  // empty unless complete
};

// Annotation workflow: every annotator sees every clip once, in an order
// drawn from (seed, annotator id). Submissions are accepted for the clip
// currently assigned or for clips the annotator already annotated (fine
// tuning replaces the earlier event).
class AnnotationService {
 public:
  // An empty `annotators` list opens a session for any id on first contact.
  AnnotationService(corpus::Corpus corpus, const std::filesystem::path& log, std::uint64_t seed,
                    std::vector<std::string> annotators);

  Assignment next_clip(const std::string& annotator);
  void submit(const AnnotationEvent& event);
  void fine_tune(const AnnotationEvent& event);  // requires an existing event

  std::vector<std::string> queue(const std::string& annotator) const;
  Export export_all() const;
  std::string export_manifest_json() const;
  std::filesystem::path video_path(const std::string& vid) const;
  std::size_t event_count() const;
  const corpus::Corpus& corpus() const { return corpus_; }

 private:
  const std::vector<std::string>& session(const std::string& annotator);
  void check_event(const AnnotationEvent& event) const;
  Assignment assignment_locked(const std::string& annotator, const std::vector<std::string>& order) const;

  corpus::Corpus corpus_;
  std::uint64_t seed_;
  bool open_registration_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::vector<std::string>> queues_;
  AnnotationStore store_;
};

// Clip order for one annotator: vids sorted, then a Fisher-Yates shuffle
// from stream (seed, annotator).
std::vector<std::string> assignment_order(std::vector<std::string> vids, std::uint64_t seed, const std::string& annotator);

}  // namespace xnec::annotation
