#include "xnec/fixture.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "xnec/aggregate.hpp"
#include "xnec/csv.hpp"
#include "xnec/error.hpp"
#include "xnec/media.hpp"
#include "xnec/random.hpp"
#include "xnec/windows.hpp"

namespace xnec::fixture {
namespace {

constexpr std::array<const char*, 6> kScenarios = {"pedestrian", "cut_in", "stopped_vehicle",
                                                   "cyclist",    "debris", "traffic_light"};

// Three phrasings per scenario; hazards explain the action, distractors say
// why none is taken.
constexpr const char* kHazardText[6][3] = {
    {"Braking because a pedestrian is crossing the road ahead", "Slowing down for a pedestrian stepping into the street",
     "Stopping since a pedestrian walks out in front of the car"},
    {"Slowing down because a car cuts into our lane", "Braking as the vehicle on the right cuts in suddenly",
     "Reducing speed because another car merges abruptly into the lane"},
    {"Changing lanes because a stopped vehicle blocks the lane", "Steering left to pass the stopped truck in our lane",
     "Moving over since a broken down vehicle is stopped ahead"},
    {"Giving way because a cyclist swerves into the lane", "Slowing for the cyclist who moves into our path",
     "Braking gently because a bicycle rider drifts toward the car"},
    {"Steering around debris lying on the road", "Avoiding an object that fell onto the road surface",
     "Swerving slightly to miss debris in the lane"},
    {"Stopping because the traffic light turned red", "Braking for the red light at the intersection",
     "Coming to a stop as the signal changes to red"},
};
constexpr const char* kDistractorText[6][3] = {
    {"No action needed, the pedestrian stays on the sidewalk", "Keeping speed, the person on the curb is not crossing",
     "Nothing to do, the pedestrian waits at the corner"},
    {"No action needed, the car in the next lane keeps its lane", "Keeping speed, the neighbouring car stays in its lane",
     "Nothing to do, the other vehicle does not merge"},
    {"No action needed, the parked car is off the road", "Keeping speed, the stopped car is on the shoulder",
     "Nothing to do, the vehicle is parked outside our lane"},
    {"No action needed, the cyclist stays in the bike lane", "Keeping speed, the bicycle rider keeps to the side",
     "Nothing to do, the cyclist is separated from traffic"},
    {"No action needed, the object is beside the road", "Keeping speed, the debris lies on the shoulder",
     "Nothing to do, the item is outside the lane"},
    {"No action needed, the light for our lane stays green", "Keeping speed, the signal ahead is green",
     "Nothing to do, the traffic light shows green"},
};

double normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng), u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

struct Blob {
  double x, y, vx, vy, sigma, intensity;
};

struct ClipPlan {
  PlantedClip planted;
  std::vector<Blob> cars;
  double gaze_x = 0.0, gaze_y = 0.0;  // resting fixation
  std::vector<std::pair<double, double>> brakes;  // (start, length) seconds
  double base_speed = 12.0;
  double heading = 0.0;
  double heading_rate = 0.0;
};

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void render(const ClipPlan& plan, const Options& o, Rng& noise, media::Video& video, media::Video& gaze) {
  const int w = o.width, h = o.height;
  const auto frames = static_cast<int>(std::lround(o.duration * o.fps));
  video.width = gaze.width = w;
  video.height = gaze.height = h;
  const PlantedClip& p = plan.planted;
  const double saccade = 0.05;
  for (int f = 0; f < frames; ++f) {
    const double t = f / o.fps;
    std::vector<std::uint8_t> img(static_cast<std::size_t>(w) * h), gz(img.size());
    const bool event = t >= p.event_time;
    const double fade = std::clamp((t - p.event_time) / 0.15, 0.0, 1.0);
    double gx = plan.gaze_x + 1.5 * std::sin(0.9 * t + p.event_time);
    double gy = plan.gaze_y + 1.0 * std::cos(0.7 * t);
    if (p.kind != Kind::distractor && t >= p.event_time + saccade) {
      gx = p.object_x;
      gy = p.object_y;
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double v = 0.38 - 0.18 * y / h;
        // dashed lane markings drifting toward the viewer
        for (int lane : {w / 3, 2 * w / 3}) {
          if (x == lane && std::fmod(y + 14.0 * t + 100.0, 8.0) < 4.0) v += 0.12;
        }
        for (const Blob& b : plan.cars) {
          const double dx = x - (b.x + b.vx * t), dy = y - (b.y + b.vy * t);
          v += b.intensity * std::exp(-(dx * dx + dy * dy) / (2 * b.sigma * b.sigma));
        }
        if (event) {
          const double dx = x - p.object_x, dy = y - p.object_y;
          v += fade * 0.85 * std::exp(-(dx * dx + dy * dy) / (2 * 2.5 * 2.5));
        }
        v += 0.03 * (2.0 * uniform01(noise) - 1.0);
        img[y * w + x] = to_byte(v);
        const double ex = x - gx, ey = y - gy;
        gz[y * w + x] = to_byte(std::exp(-(ex * ex + ey * ey) / (2 * 3.0 * 3.0)));
      }
    }
    video.timestamps.push_back(t);
    video.frames.push_back(std::move(img));
    gaze.timestamps.push_back(t);
    gaze.frames.push_back(std::move(gz));
  }
}

void write_telemetry(const std::filesystem::path& path, const ClipPlan& plan, const Options& o) {
  std::ofstream out(path);
  out << "timestamp,speed,course\n";
  const int samples = static_cast<int>(std::lround(o.duration * 5.0));
  char buf[96];
  for (int i = 0; i < samples; ++i) {
    const double t = i / 5.0;
    double speed = plan.base_speed;
    for (const auto& [start, len] : plan.brakes) {
      if (t >= start) speed -= 2.5 * std::min(t - start, len);
      if (t >= start + len) speed += 1.5 * std::min(t - start - len, len * 2.5 / 1.5);
    }
    double course = std::fmod(plan.heading + plan.heading_rate * t + 360.0, 360.0);
    std::snprintf(buf, sizeof buf, "%.3f,%.4f,%.3f\n", t, std::max(speed, 0.0), course);
    out << buf;
  }
}

}  // namespace

const char* to_string(Kind kind) {
  switch (kind) {
    case Kind::hazard: return "hazard";
    case Kind::distractor: return "distractor";
    case Kind::moderate: return "moderate";
  }
  return "?";
}

Summary generate(const std::filesystem::path& dir, const Options& o) {
  if (o.clips < 1 || o.annotators < 1 || o.width < 16 || o.height < 16) {
    throw Error(Errc::invalid_argument, "fixture: need at least one clip, one annotator and 16x16 frames");
  }
  if (o.duration < 5.0) throw Error(Errc::invalid_argument, "fixture: clips must last at least 5 s", "duration");
  std::filesystem::create_directories(dir / "raw");
  std::filesystem::create_directories(dir / "study");
  Summary s;
  s.dir = dir;
  s.clips_csv = dir / "clips.csv";
  s.flags_csv = dir / "flags.csv";
  s.annotations_csv = dir / "annotations.csv";
  s.ratings_csv = dir / "study" / "ratings.csv";
  s.participants_csv = dir / "study" / "participants.csv";
  for (int a = 0; a < o.annotators; ++a) {
    char id[16];
    std::snprintf(id, sizeof id, "a%02d", a + 1);
    s.annotators.push_back(id);
  }

  // Balanced kinds, shuffled.
  Rng rng = make_stream(o.seed, "fixture");
  std::vector<Kind> kinds;
  const int n_hazard = std::max(1, static_cast<int>(std::lround(0.40 * o.clips)));
  const int n_moderate = static_cast<int>(std::lround(0.15 * o.clips));
  for (int i = 0; i < o.clips; ++i) kinds.push_back(i < n_hazard ? Kind::hazard : i < n_hazard + n_moderate ? Kind::moderate : Kind::distractor);
  for (std::size_t i = kinds.size(); i > 1; --i) std::swap(kinds[i - 1], kinds[windows::uniform_index(rng, i)]);
  std::vector<bool> flagged(o.clips, false);
  const int n_flagged = static_cast<int>(std::floor(o.flagged_fraction * o.clips));
  for (int k = 0; k < n_flagged; ++k) {
    int i;
    do i = static_cast<int>(windows::uniform_index(rng, o.clips)); while (flagged[i]);
    flagged[i] = true;
  }

  std::ofstream clips_csv(s.clips_csv);
  clips_csv << "vid,video,gaze,telemetry\n";
  std::vector<aggregate::AnnotationEvent> events;
  const double cx = o.width / 2.0, cy = o.height * 0.58;
  for (int i = 0; i < o.clips; ++i) {
    char vid[32];
    std::snprintf(vid, sizeof vid, "clip_%03d", i);
    Rng r = make_stream(o.seed, std::string("clip:") + vid);
    ClipPlan plan;
    PlantedClip& p = plan.planted;
    p.vid = vid;
    p.kind = kinds[i];
    p.flagged = flagged[i];
    p.scenario = kScenarios[windows::uniform_index(r, kScenarios.size())];
    p.event_time = uniform(r, 0.5 * o.duration, 0.8 * o.duration);
    // Object well away from the resting fixation, same distribution for all kinds.
    do {
      p.object_x = static_cast<int>(uniform(r, 5, o.width - 5));
      p.object_y = static_cast<int>(uniform(r, 0.2 * o.height, o.height - 5));
    } while (std::hypot(p.object_x - cx, p.object_y - cy) < 0.3 * o.width);
    plan.gaze_x = cx;
    plan.gaze_y = cy;
    for (int c = 0; c < 2; ++c) {
      plan.cars.push_back({uniform(r, 6, o.width - 6), uniform(r, 0.35 * o.height, o.height - 6), uniform(r, -0.8, 0.8),
                           uniform(r, -0.4, 0.4), 2.5, uniform(r, 0.12, 0.2)});
    }
    plan.base_speed = uniform(r, 9.0, 15.0);
    const int brakes = static_cast<int>(windows::uniform_index(r, 3));
    for (int b = 0; b < brakes; ++b) plan.brakes.emplace_back(uniform(r, 0.5, o.duration - 2.0), uniform(r, 0.5, 1.5));
    plan.heading = uniform(r, 0.0, 360.0);
    plan.heading_rate = uniform(r, -3.0, 3.0);

    media::Video video, gaze;
    Rng noise = make_stream(o.seed, std::string("noise:") + vid);
    render(plan, o, noise, video, gaze);
    const std::string base = std::string("raw/") + vid;
    media::write_video(dir / (base + ".video.xnv"), video);
    media::write_video(dir / (base + ".gaze.xnv"), gaze);
    write_telemetry(dir / (base + ".telemetry.csv"), plan, o);
    clips_csv << vid << "," << base << ".video.xnv," << base << ".gaze.xnv," << base << ".telemetry.csv\n";

    const int scenario = static_cast<int>(std::find(kScenarios.begin(), kScenarios.end(), p.scenario) - kScenarios.begin());
    double center, spread;
    switch (p.kind) {
      case Kind::hazard: center = uniform(r, 0.74, 0.9), spread = 0.05; break;
      case Kind::moderate: center = uniform(r, 0.56, 0.64), spread = 0.03; break;
      default: center = uniform(r, 0.12, 0.38), spread = 0.05; break;
    }
    for (const auto& a : s.annotators) {
      aggregate::AnnotationEvent e;
      e.vid = vid;
      e.annotator_id = a;
      e.moment = std::round((p.event_time + uniform(r, 0.2, 0.9)) * 1000.0) / 1000.0;
      e.score = std::round(std::clamp(center + spread * normal(r), 0.0, 1.0) * 1000.0) / 1000.0;
      const auto& texts = p.kind == Kind::distractor ? kDistractorText[scenario] : kHazardText[scenario];
      e.explanation = texts[windows::uniform_index(r, 3)];
      events.push_back(std::move(e));
    }
    s.clips.push_back(p);
  }
  {
    std::ofstream out(s.annotations_csv);
    aggregate::write_annotations(out, events);
  }
  {
    std::ofstream out(s.flags_csv);
    out << "vid,violation\n";
    const char* codes[] = {"traffic-law-violation", "unsafe-action", "no-explanation-moment"};
    int k = 0;
    for (const auto& p : s.clips)
      if (p.flagged) out << p.vid << "," << codes[k++ % 3] << "\n";
  }

  // Passenger study. Seat changes are planted: ordinary -> AV has 8 movers of
  // whom one is relieved, AV -> AV with explanations has 6 movers of whom five
  // are relieved.
  {
    std::ofstream out(s.participants_csv);
    out << "participant_id,speed_on_30mph,self_described_aggressive,frequent_lane_change,motion_sickness,"
           "seat_ordinary,seat_av,seat_av_explained,reason_av,reason_av_explained\n";
    Rng pr = make_stream(o.seed, "participants");
    for (int i = 0; i < o.participants; ++i) {
      std::string so = "C", sa = "C", se = "C", ra, re;
      if (i == 0) {
        so = "C", sa = "B", se = "B", ra = "comfort";
      } else if (i >= 1 && i <= 7) {
        so = "B", sa = "A", ra = "safety";
        if (i <= 5) se = "B", re = "comfort";
        else if (i == 6) se = "C", re = "control";
        else se = "A";
      } else {
        const char* seats[] = {"A", "B", "C", "D"};
        so = sa = se = seats[i % 4];
      }
      char line[256];
      std::snprintf(line, sizeof line, "P%02d,%d,%d,%d,%d,%s,%s,%s,%s,%s\n", i + 1,
                    28 + static_cast<int>(windows::uniform_index(pr, 12)), uniform01(pr) < 0.2 ? 1 : 0,
                    uniform01(pr) < 0.2 ? 1 : 0, uniform01(pr) < 0.25 ? 1 : 0, so.c_str(), sa.c_str(), se.c_str(),
                    ra.c_str(), re.c_str());
      out << line;
    }
  }
  {
    std::ofstream out(s.ratings_csv);
    out << "participant_id,vid,necessity,attention,rank_action_reason_first,rank_action_reason_third,"
           "rank_action_first,rank_action_third,flag_near_crash,flag_pedestrian,flag_cyclist,flag_traffic_light\n";
    Rng rr = make_stream(o.seed, "ratings");
    const int videos = std::min<int>(o.study_videos, o.clips);
    for (int i = 0; i < o.participants; ++i) {
      const double offset = 0.8 * normal(rr);
      for (int v = 0; v < videos; ++v) {
        const PlantedClip& p = s.clips[v];
        const double base = p.kind == Kind::hazard ? 8.0 : p.kind == Kind::moderate ? 5.5 : 2.5;
        const double necessity = std::clamp(std::round(base + offset + 0.8 * normal(rr)), 1.0, 10.0);
        const double attention = std::clamp(std::round(necessity + 1.2 * normal(rr)), 1.0, 10.0);
        // Preference for action + reason, first person; ranks are a permutation.
        std::array<std::pair<double, int>, 4> pref;
        const double means[4] = {0.0, 0.6, 1.0, 1.4};
        for (int k = 0; k < 4; ++k) pref[k] = {means[k] + 0.6 * normal(rr), k};
        std::sort(pref.begin(), pref.end());
        int rank[4];
        for (int k = 0; k < 4; ++k) rank[pref[k].second] = k + 1;
        const bool near_crash = p.kind != Kind::distractor && (p.scenario == "cut_in" || p.scenario == "pedestrian");
        char line[256];
        std::snprintf(line, sizeof line, "P%02d,%s,%g,%g,%d,%d,%d,%d,%d,%d,%d,%d\n", i + 1, p.vid.c_str(), necessity,
                      attention, rank[0], rank[1], rank[2], rank[3], near_crash ? 1 : 0, p.scenario == "pedestrian" ? 1 : 0,
                      p.scenario == "cyclist" ? 1 : 0, p.scenario == "traffic_light" ? 1 : 0);
        out << line;
      }
    }
  }
  return s;
}

}  // namespace xnec::fixture
