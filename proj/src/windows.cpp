#include "xnec/windows.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "xnec/csv.hpp"
#include "xnec/error.hpp"

namespace xnec::windows {

double acceleration_at(const corpus::ClipRecord& clip, int frame) {
  if (frame < 1 || static_cast<std::size_t>(frame) >= clip.speed.size()) {
    throw Error(Errc::invalid_argument, clip.vid + ": no acceleration at frame " + std::to_string(frame));
  }
  return (clip.speed[frame] - clip.speed[frame - 1]) / media::kFramePeriod;
}

namespace {

void require_label(const corpus::ClipRecord& clip) {
  if (!clip.necessity_score || !clip.explanation_interval) {
    throw Error(Errc::invalid_argument, clip.vid + ": clip is not labeled", "necessity_score");
  }
}

FrameWindow make_window(const corpus::ClipRecord& clip, int end, int label) {
  return {clip.vid, end, label, acceleration_at(clip, end), *clip.necessity_score};
}

}  // namespace

PositiveWindows positive_windows(const corpus::ClipRecord& clip, const LabelingPolicy& policy) {
  require_label(clip);
  PositiveWindows out;
  if (*clip.necessity_score < policy.p0) return out;
  const auto& iv = *clip.explanation_interval;
  const int last = static_cast<int>(clip.frame_count()) - 1;
  // Frame e is inside the interval iff start <= e/10 <= end; the epsilon keeps
  // decimal endpoints such as 4.5 from falling off through rounding.
  int lo = static_cast<int>(std::ceil(iv.start * media::kFrameRate - 1e-9));
  int hi = static_cast<int>(std::floor(iv.end * media::kFrameRate + 1e-9));
  hi = std::min(hi, last);
  if (hi < kMinEndFrame) {
    out.warning = clip.vid + ": explanation interval ends before " + std::to_string(kMinEndFrame * media::kFramePeriod) +
                  " s; no positive window has full history";
    return out;
  }
  lo = std::max(lo, kMinEndFrame);
  for (int e = lo; e <= hi; ++e) out.windows.push_back(make_window(clip, e, 1));
  return out;
}

std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  if (bound == 0) throw Error(Errc::invalid_argument, "uniform_index: empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw;
  do draw = rng();
  while (draw >= limit);
  return draw % bound;
}

std::vector<FrameWindow> negative_windows(const corpus::ClipRecord& clip, const LabelingPolicy& policy) {
  require_label(clip);
  if (*clip.necessity_score >= policy.p0) {
    throw Error(Errc::invalid_argument, clip.vid + ": negatives come only from clips below p0");
  }
  if (clip.frame_count() < static_cast<std::size_t>(kWindowFrames)) {
    throw Error(Errc::too_short, clip.vid + ": clip has " + std::to_string(clip.frame_count()) +
                                     " frames, a window needs " + std::to_string(kWindowFrames));
  }
  auto rng = make_stream(policy.seed, clip.vid);
  const auto range = clip.frame_count() - kMinEndFrame;
  std::vector<FrameWindow> out;
  for (int i = 0; i < policy.negatives_per_clip; ++i) {
    const int end = kMinEndFrame + static_cast<int>(uniform_index(rng, range));
    out.push_back(make_window(clip, end, 0));
  }
  return out;
}

FrameWindow negative_window(const corpus::ClipRecord& clip, const LabelingPolicy& policy) {
  auto single = policy;
  single.negatives_per_clip = 1;
  return negative_windows(clip, single).front();
}

std::vector<double> class_weights(std::span<const int> labels) {
  std::size_t pos = 0, neg = 0;
  for (int y : labels) (y ? pos : neg)++;
  if (pos == 0 || neg == 0) throw Error(Errc::invalid_argument, "class_weights: both classes are required");
  std::vector<double> w;
  w.reserve(labels.size());
  for (int y : labels) w.push_back(0.5 / static_cast<double>(y ? pos : neg));
  return w;
}

std::vector<double> class_weights(std::span<const FrameWindow> windows) {
  std::vector<int> labels;
  labels.reserve(windows.size());
  for (const auto& w : windows) labels.push_back(w.label);
  return class_weights(labels);
}

WindowSet extract(std::span<const corpus::ClipRecord> clips, const LabelingPolicy& policy) {
  WindowSet set;
  for (const auto& clip : clips) {
    if (!clip.labeled()) continue;
    if (*clip.necessity_score >= policy.p0) {
      auto pos = positive_windows(clip, policy);
      if (pos.warning) set.warnings.push_back(*pos.warning);
      set.windows.insert(set.windows.end(), pos.windows.begin(), pos.windows.end());
    } else {
      try {
        auto neg = negative_windows(clip, policy);
        set.windows.insert(set.windows.end(), neg.begin(), neg.end());
      } catch (const Error& e) {
        if (e.code() != Errc::too_short) throw;
        set.warnings.push_back(e.what());
      }
    }
  }
  return set;
}

bool label_consistent(const FrameWindow& window, const corpus::ClipRecord& clip, double p0) {
  if (window.vid != clip.vid || !clip.labeled()) return false;
  if (window.first_frame() < 0 || static_cast<std::size_t>(window.end_frame) >= clip.frame_count()) return false;
  if (window.label == 1) {
    const auto& iv = *clip.explanation_interval;
    return *clip.necessity_score >= p0 && window.end_time() >= iv.start - 1e-9 && window.end_time() <= iv.end + 1e-9;
  }
  return *clip.necessity_score < p0;
}

void write_index(std::ostream& out, std::span<const FrameWindow> windows, std::span<const double> weights) {
  if (weights.size() != windows.size()) throw Error(Errc::invalid_argument, "write_index: weight count mismatch");
  csv::write_row(out, {"vid", "end_frame", "label", "weight", "score"});
  for (std::size_t i = 0; i < windows.size(); ++i) {
    std::ostringstream w, s;
    w.precision(17);
    s.precision(17);
    w << weights[i];
    s << windows[i].score;
    csv::write_row(out, {windows[i].vid, std::to_string(windows[i].end_frame), std::to_string(windows[i].label), w.str(),
                         s.str()});
  }
}

std::vector<FrameWindow> read_index(const std::filesystem::path& path) {
  const auto table = csv::read_table(path, {"vid", "end_frame", "label", "weight", "score"});
  std::vector<FrameWindow> out;
  for (const auto& row : table.rows) {
    FrameWindow w;
    w.vid = row[table.column("vid")];
    w.end_frame = static_cast<int>(csv::to_long(row[table.column("end_frame")], "end_frame"));
    w.label = static_cast<int>(csv::to_long(row[table.column("label")], "label"));
    w.score = csv::to_double(row[table.column("score")], "score");
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace xnec::windows
