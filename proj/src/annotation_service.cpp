#include "xnec/annotation_service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xnec/error.hpp"
#include "xnec/random.hpp"
#include "xnec/windows.hpp"

namespace xnec::annotation {

using nlohmann::json;

std::string event_to_json(const AnnotationEvent& e) {
  json j = {{"vid", e.vid}, {"annotator_id", e.annotator_id}, {"moment", e.moment}, {"score", e.score},
            {"explanation", e.explanation}};
  return j.dump();
}

namespace {

template <typename T>
T field(const json& j, const char* name) {
  if (!j.contains(name)) throw Error(Errc::validation, std::string("missing field '") + name + "'", name);
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::validation, std::string("field '") + name + "' has the wrong type", name);
  }
}

}  // namespace

AnnotationEvent event_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::validation, std::string("malformed JSON: ") + e.what(), "body");
  }
  if (!j.is_object()) throw Error(Errc::validation, "expected a JSON object", "body");
  AnnotationEvent e;
  e.vid = field<std::string>(j, "vid");
  e.annotator_id = field<std::string>(j, "annotator_id");
  e.moment = field<double>(j, "moment");
  e.score = field<double>(j, "score");
  e.explanation = field<std::string>(j, "explanation");
  return e;
}

AnnotationStore::AnnotationStore(const std::filesystem::path& log) : path_(log) {
  if (log.has_parent_path()) std::filesystem::create_directories(log.parent_path());
  std::string content;
  {
    std::ifstream in(log, std::ios::binary);
    if (in) content.assign(std::istreambuf_iterator<char>(in), {});
  }
  std::size_t good = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    const std::size_t nl = content.find('\n', pos);
    if (nl == std::string::npos) break;  // unterminated tail: never acknowledged
    const std::string line = content.substr(pos, nl - pos);
    if (!line.empty()) {
      AnnotationEvent e;
      try {
        e = event_from_json(line);
      } catch (const Error&) {
        throw Error(Errc::validation, log.string() + ": damaged record at byte " + std::to_string(pos));
      }
      state_[{e.vid, e.annotator_id}] = e;
    }
    pos = nl + 1;
    good = pos;
  }
  fd_ = ::open(log.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(Errc::io, "cannot open " + log.string() + ": " + std::strerror(errno));
  if (good < content.size()) {
    truncated_ = content.size() - good;
    if (::ftruncate(fd_, static_cast<off_t>(good)) != 0 || ::fsync(fd_) != 0) {
      throw Error(Errc::io, "cannot truncate " + log.string());
    }
  }
}

AnnotationStore::~AnnotationStore() {
  if (fd_ >= 0) ::close(fd_);
}

void AnnotationStore::put(const AnnotationEvent& event) {
  const std::string line = event_to_json(event) + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::io, "append to " + path_.string() + " failed: " + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) throw Error(Errc::io, "fsync of " + path_.string() + " failed");
  state_[{event.vid, event.annotator_id}] = event;
}

std::optional<AnnotationEvent> AnnotationStore::get(const std::string& vid, const std::string& annotator) const {
  const auto it = state_.find({vid, annotator});
  if (it == state_.end()) return std::nullopt;
  return it->second;
}

std::vector<AnnotationEvent> AnnotationStore::events() const {
  std::vector<AnnotationEvent> out;
  out.reserve(state_.size());
  for (const auto& [key, e] : state_) out.push_back(e);
  return out;
}

std::size_t AnnotationStore::count(const std::string& vid) const {
  std::size_t n = 0;
  for (auto it = state_.lower_bound({vid, ""}); it != state_.end() && it->first.first == vid; ++it) ++n;
  return n;
}

std::vector<std::string> assignment_order(std::vector<std::string> vids, std::uint64_t seed, const std::string& annotator) {
  std::sort(vids.begin(), vids.end());
  Rng rng = make_stream(seed, "queue:" + annotator);
  for (std::size_t i = vids.size(); i > 1; --i) std::swap(vids[i - 1], vids[windows::uniform_index(rng, i)]);
  return vids;
}

AnnotationService::AnnotationService(corpus::Corpus corpus, const std::filesystem::path& log, std::uint64_t seed,
                                     std::vector<std::string> annotators)
    : corpus_(std::move(corpus)), seed_(seed), open_registration_(annotators.empty()), store_(log) {
  std::vector<std::string> vids;
  for (const auto& c : corpus_.clips) vids.push_back(c.vid);
  for (const auto& a : annotators) {
    if (a.empty()) throw Error(Errc::validation, "empty annotator id", "annotators");
    queues_[a] = assignment_order(vids, seed_, a);
  }
}

const std::vector<std::string>& AnnotationService::session(const std::string& annotator) {
  auto it = queues_.find(annotator);
  if (it != queues_.end()) return it->second;
  if (!open_registration_ || annotator.empty()) {
    throw Error(Errc::unknown_id, "unknown annotator '" + annotator + "'", "annotator_id");
  }
  std::vector<std::string> vids;
  for (const auto& c : corpus_.clips) vids.push_back(c.vid);
  return queues_.emplace(annotator, assignment_order(vids, seed_, annotator)).first->second;
}

Assignment AnnotationService::assignment_locked(const std::string& annotator, const std::vector<std::string>& order) const {
  Assignment a;
  a.total = order.size();
  for (const auto& vid : order) {
    if (store_.get(vid, annotator)) {
      ++a.position;
      continue;
    }
    if (a.vid.empty()) {
      const auto& clip = corpus_.find(vid);
      a.vid = vid;
      a.duration = clip.duration();
      a.frame_count = clip.frame_count();
    }
  }
  a.done = a.vid.empty();
  return a;
}

Assignment AnnotationService::next_clip(const std::string& annotator) {
  std::unique_lock lock(mutex_);
  return assignment_locked(annotator, session(annotator));
}

std::vector<std::string> AnnotationService::queue(const std::string& annotator) const {
  std::shared_lock lock(mutex_);
  const auto it = queues_.find(annotator);
  if (it == queues_.end()) throw Error(Errc::unknown_id, "unknown annotator '" + annotator + "'", "annotator_id");
  return it->second;
}

void AnnotationService::check_event(const AnnotationEvent& event) const {
  aggregate::validate_event(event);
  const corpus::ClipRecord* clip = nullptr;
  for (const auto& c : corpus_.clips)
    if (c.vid == event.vid) clip = &c;
  if (!clip) throw Error(Errc::unknown_id, "unknown clip '" + event.vid + "'", "vid");
  if (event.moment > clip->duration()) {
    throw Error(Errc::validation, "moment lies past the end of the clip", "moment");
  }
}

void AnnotationService::submit(const AnnotationEvent& event) {
  std::unique_lock lock(mutex_);
  const auto& order = session(event.annotator_id);
  check_event(event);
  if (!store_.get(event.vid, event.annotator_id)) {
    const Assignment a = assignment_locked(event.annotator_id, order);
    if (a.done || a.vid != event.vid) {
      throw Error(Errc::conflict, "clip '" + event.vid + "' is not assigned to '" + event.annotator_id + "'", "vid");
    }
  }
  store_.put(event);
}

void AnnotationService::fine_tune(const AnnotationEvent& event) {
  std::unique_lock lock(mutex_);
  session(event.annotator_id);
  check_event(event);
  if (!store_.get(event.vid, event.annotator_id)) {
    throw Error(Errc::not_found, "no annotation of '" + event.vid + "' by '" + event.annotator_id + "' to fine-tune", "vid");
  }
  store_.put(event);
}

std::size_t AnnotationService::event_count() const {
  std::shared_lock lock(mutex_);
  return store_.size();
}

Export AnnotationService::export_all() const {
  std::shared_lock lock(mutex_);
  Export out;
  const auto events = store_.events();
  std::ostringstream csv;
  aggregate::write_annotations(csv, events);
  out.csv = csv.str();
  bool complete = !corpus_.clips.empty();
  for (const auto& c : corpus_.clips)
    if (store_.count(c.vid) < aggregate::kMinEvents) complete = false;
  for (const auto& [annotator, order] : queues_)
    for (const auto& vid : order)
      if (!store_.get(vid, annotator)) complete = false;
  out.complete = complete;
  if (complete) out.aggregated = aggregate::aggregate_all(events);
  return out;
}

std::string AnnotationService::export_manifest_json() const {
  const Export e = export_all();
  json labels = json::object();
  for (const auto& [vid, l] : e.aggregated.labels) {
    labels[vid] = {{"necessity_score", l.necessity_score},
                   {"interval", {l.interval.start, l.interval.end}},
                   {"contributing_ids", l.contributing_ids},
                   {"message", l.message}};
  }
  json j = {{"complete", e.complete}, {"clips", corpus_.clips.size()}, {"events", event_count()}, {"labels", labels}};
  return j.dump(2);
}

std::filesystem::path AnnotationService::video_path(const std::string& vid) const {
  for (const auto& c : corpus_.clips)
    if (c.vid == vid) return corpus_.resolve(c.video_path);
  throw Error(Errc::unknown_id, "unknown clip '" + vid + "'", "vid");
}

}  // namespace xnec::annotation
