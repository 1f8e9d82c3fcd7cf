#include "xnec/studystats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <set>

#include <boost/math/distributions/chi_squared.hpp>

#include "xnec/csv.hpp"
#include "xnec/error.hpp"

namespace xnec::stats {

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(Errc::invalid_argument, "pearson: series lengths differ");
  if (x.size() < 3) throw Error(Errc::invalid_argument, "pearson: need at least 3 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(Errc::undefined, "pearson: constant series has no correlation");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double point_biserial(std::span<const int> b, std::span<const double> y) {
  if (b.size() != y.size()) throw Error(Errc::invalid_argument, "point_biserial: series lengths differ");
  if (y.size() < 3) throw Error(Errc::invalid_argument, "point_biserial: need at least 3 points");
  double sum1 = 0.0, sum0 = 0.0;
  std::size_t n1 = 0, n0 = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i] == 1) {
      sum1 += y[i];
      ++n1;
    } else if (b[i] == 0) {
      sum0 += y[i];
      ++n0;
    } else {
      throw Error(Errc::invalid_argument, "point_biserial: binary series must hold 0/1");
    }
  }
  if (n1 == 0 || n0 == 0) throw Error(Errc::undefined, "point_biserial: binary series has a single class");
  const double n = static_cast<double>(y.size());
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  if (ss == 0.0) throw Error(Errc::undefined, "point_biserial: constant series has no correlation");
  const double sd = std::sqrt(ss / n);
  const double m1 = sum1 / static_cast<double>(n1), m0 = sum0 / static_cast<double>(n0);
  const double r = (m1 - m0) / sd * std::sqrt(static_cast<double>(n1) * static_cast<double>(n0)) / n;
  return std::clamp(r, -1.0, 1.0);
}

std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = rank;
    i = j + 1;
  }
  return ranks;
}

namespace {

double exact_friedman_p(const std::vector<std::vector<double>>& ranks) {
  const std::size_t n = ranks.size(), k = ranks.front().size();
  if (n > 10 || k > 5) throw Error(Errc::invalid_argument, "exact Friedman p-value limited to n <= 10, k <= 5");
  long observed = 0;
  std::vector<long> col(k, 0);
  for (const auto& row : ranks) {
    for (std::size_t j = 0; j < k; ++j) {
      if (row[j] != std::floor(row[j])) throw Error(Errc::invalid_argument, "exact Friedman p-value needs untied rankings");
      col[j] += static_cast<long>(row[j]);
    }
  }
  for (long c : col) observed += c * c;

  std::vector<std::vector<int>> perms;
  std::vector<int> p(k);
  std::iota(p.begin(), p.end(), 1);
  do perms.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  const double weight = 1.0 / static_cast<double>(perms.size());

  std::map<std::vector<int>, double> dist{{std::vector<int>(k, 0), 1.0}};
  for (std::size_t i = 0; i < n; ++i) {
    std::map<std::vector<int>, double> next;
    for (const auto& [sums, prob] : dist) {
      for (const auto& perm : perms) {
        auto s = sums;
        for (std::size_t j = 0; j < k; ++j) s[j] += perm[j];
        next[s] += prob * weight;
      }
    }
    dist = std::move(next);
  }
  double p_value = 0.0;
  for (const auto& [sums, prob] : dist) {
    long ss = 0;
    for (int s : sums) ss += static_cast<long>(s) * s;
    if (ss >= observed) p_value += prob;
  }
  return std::min(1.0, p_value);
}

}  // namespace

FriedmanResult friedman(const std::vector<std::vector<double>>& ranks, double alpha, PValueMethod method) {
  const std::size_t n = ranks.size();
  if (n < 2) throw Error(Errc::invalid_argument, "friedman: need at least 2 subjects");
  const std::size_t k = ranks.front().size();
  if (k < 3) throw Error(Errc::invalid_argument, "friedman: need at least 3 treatments");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::invalid_argument, "friedman: alpha outside (0,1)");

  std::vector<double> mean_rank(k, 0.0);
  double tie_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = ranks[i];
    if (row.size() != k) throw Error(Errc::validation, "friedman: row " + std::to_string(i) + " has wrong length", "ranking");
    if (midranks(row) != row) {
      throw Error(Errc::validation, "friedman: row " + std::to_string(i) + " is not a (mid-)ranking of 1.." +
                                        std::to_string(k), "ranking");
    }
    std::map<double, int> groups;
    for (std::size_t j = 0; j < k; ++j) {
      mean_rank[j] += row[j];
      ++groups[row[j]];
    }
    for (const auto& [_, t] : groups) tie_sum += static_cast<double>(t) * t * t - t;
  }
  const double nd = static_cast<double>(n), kd = static_cast<double>(k);
  double sum_sq = 0.0;
  for (auto& r : mean_rank) {
    r /= nd;
    sum_sq += r * r;
  }
  const double raw = 12.0 * nd / (kd * (kd + 1.0)) * sum_sq - 3.0 * nd * (kd + 1.0);
  const double correction = 1.0 - tie_sum / (nd * (kd * kd * kd - kd));
  if (correction <= 0.0) throw Error(Errc::undefined, "friedman: every row is fully tied");

  FriedmanResult result;
  result.statistic = std::max(0.0, raw / correction);
  result.dof = static_cast<int>(k) - 1;
  result.method = method;
  if (method == PValueMethod::exact) {
    result.p_value = exact_friedman_p(ranks);
  } else {
    boost::math::chi_squared_distribution<double> chi2(result.dof);
    result.p_value = boost::math::cdf(boost::math::complement(chi2, result.statistic));
  }
  result.reject = result.p_value < alpha;
  return result;
}

const char* to_string(DriverKind kind) { return kind == DriverKind::aggressive ? "aggressive" : "cautious"; }

const char* to_string(DriverCondition c) {
  switch (c) {
    case DriverCondition::speeding: return "speeding";
    case DriverCondition::self_described: return "self-described";
    case DriverCondition::frequent_lane_change: return "frequent-lane-change";
  }
  return "?";
}

DriverType classify_driver(const std::string& participant_id, const DriverAnswers& answers) {
  if (!answers.speed_on_30mph_road) throw Error(Errc::validation, participant_id + ": incomplete response", "speed_on_30mph");
  if (!answers.self_described_aggressive) {
    throw Error(Errc::validation, participant_id + ": incomplete response", "self_described_aggressive");
  }
  if (!answers.frequent_lane_change) {
    throw Error(Errc::validation, participant_id + ": incomplete response", "frequent_lane_change");
  }
  DriverType type{participant_id, DriverKind::cautious, {}};
  if (*answers.speed_on_30mph_road > kSpeedingThresholdMph) type.triggered_conditions.push_back(DriverCondition::speeding);
  if (*answers.self_described_aggressive) type.triggered_conditions.push_back(DriverCondition::self_described);
  if (*answers.frequent_lane_change) type.triggered_conditions.push_back(DriverCondition::frequent_lane_change);
  if (!type.triggered_conditions.empty()) type.kind = DriverKind::aggressive;
  return type;
}

Seat parse_seat(const std::string& code) {
  if (code == "A") return Seat::A;
  if (code == "B") return Seat::B;
  if (code == "C") return Seat::C;
  if (code == "D") return Seat::D;
  throw Error(Errc::validation, "unknown seat code '" + code + "'", "seat");
}

SeatGroup group_of(Seat seat) {
  switch (seat) {
    case Seat::A: return SeatGroup::front_driver;
    case Seat::C: return SeatGroup::front_passenger;
    case Seat::B:
    case Seat::D: return SeatGroup::back;
  }
  return SeatGroup::back;
}

SeatReason parse_reason(const std::string& code) {
  if (code.empty() || code == "none") return SeatReason::none;
  if (code == "comfort") return SeatReason::comfort;
  if (code == "safety") return SeatReason::safety;
  if (code == "control") return SeatReason::control;
  throw Error(Errc::validation, "unknown seat-change reason '" + code + "'", "reason");
}

const char* to_string(SeatGroup g) {
  switch (g) {
    case SeatGroup::front_driver: return "front-driver";
    case SeatGroup::front_passenger: return "front-passenger";
    case SeatGroup::back: return "back";
  }
  return "?";
}

std::array<std::array<double, 3>, 3> TransitionMatrix::row_stochastic() const {
  std::array<std::array<double, 3>, 3> out{};
  for (int i = 0; i < 3; ++i) {
    const int total = counts[i][0] + counts[i][1] + counts[i][2];
    for (int j = 0; j < 3; ++j) out[i][j] = total ? static_cast<double>(counts[i][j]) / total : 0.0;
  }
  return out;
}

double TransitionMatrix::relieved_fraction() const {
  return movers ? static_cast<double>(relieved) / movers : 0.0;
}

std::array<TransitionMatrix, 3> seat_transitions(const std::vector<Participant>& participants) {
  std::array<TransitionMatrix, 3> out;
  out[0].from = "ordinary";
  out[0].to = "av";
  out[0].tallied = true;
  out[1].from = "av";
  out[1].to = "av_explained";
  out[1].tallied = true;
  out[2].from = "ordinary";
  out[2].to = "av_explained";

  for (const auto& p : participants) {
    if (!p.seat_ordinary || !p.seat_av || !p.seat_av_explained) {
      throw Error(Errc::validation, p.participant_id + ": all three seat answers are required", "seat");
    }
    const std::array<std::pair<Seat, Seat>, 3> pairs = {
        std::pair{*p.seat_ordinary, *p.seat_av}, std::pair{*p.seat_av, *p.seat_av_explained},
        std::pair{*p.seat_ordinary, *p.seat_av_explained}};
    const std::array<SeatReason, 3> reasons = {p.reason_av, p.reason_av_explained, SeatReason::none};
    for (std::size_t m = 0; m < 3; ++m) {
      const auto from = group_of(pairs[m].first), to = group_of(pairs[m].second);
      auto& matrix = out[m];
      ++matrix.counts[static_cast<int>(from)][static_cast<int>(to)];
      if (from == to || !matrix.tallied) continue;
      ++matrix.movers;
      if (to == SeatGroup::front_driver || reasons[m] == SeatReason::safety || reasons[m] == SeatReason::control) {
        ++matrix.anxious;
      } else if (reasons[m] == SeatReason::comfort) {
        ++matrix.relieved;
      } else {
        throw Error(Errc::validation,
                    p.participant_id + ": seat change " + matrix.from + "->" + matrix.to + " lacks a reason code",
                    m == 0 ? "reason_av" : "reason_av_explained");
      }
    }
  }
  return out;
}

namespace {

std::optional<bool> parse_bool(const std::string& text, const char* field) {
  if (text.empty()) return std::nullopt;
  if (text == "1" || text == "true" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "no") return false;
  throw Error(Errc::validation, std::string("bad boolean in ") + field + ": '" + text + "'", field);
}

}  // namespace

ResponseTable read_responses(const std::filesystem::path& ratings_csv, const std::filesystem::path& participants_csv) {
  ResponseTable table;
  std::vector<std::string> required = {"participant_id", "vid", "necessity", "attention"};
  for (const char* f : kContentFormats) required.push_back(std::string("rank_") + f);
  const auto ratings = csv::read_table(ratings_csv, required);
  for (const auto& row : ratings.rows) {
    Rating r;
    r.participant_id = row[ratings.column("participant_id")];
    r.vid = row[ratings.column("vid")];
    r.necessity = csv::to_double(row[ratings.column("necessity")], "necessity");
    r.attention = csv::to_double(row[ratings.column("attention")], "attention");
    for (std::size_t j = 0; j < kContentFormats.size(); ++j) {
      const auto name = std::string("rank_") + kContentFormats[j];
      r.content_ranking[j] = csv::to_double(row[ratings.column(name)], name);
    }
    for (std::size_t c = 0; c < ratings.header.size(); ++c) {
      const auto& name = ratings.header[c];
      if (name.rfind("flag_", 0) == 0) {
        const auto value = parse_bool(row[c], name.c_str());
        if (!value) throw Error(Errc::validation, "missing scenario flag " + name, name);
        r.scenario_flags[name.substr(5)] = *value ? 1 : 0;
      }
    }
    table.ratings.push_back(std::move(r));
  }

  const auto parts = csv::read_table(
      participants_csv, {"participant_id", "speed_on_30mph", "self_described_aggressive", "frequent_lane_change",
                         "motion_sickness", "seat_ordinary", "seat_av", "seat_av_explained", "reason_av",
                         "reason_av_explained"});
  auto seat = [](const std::string& s) -> std::optional<Seat> {
    if (s.empty()) return std::nullopt;
    return parse_seat(s);
  };
  for (const auto& row : parts.rows) {
    Participant p;
    p.participant_id = row[parts.column("participant_id")];
    const auto& speed = row[parts.column("speed_on_30mph")];
    if (!speed.empty()) p.driver.speed_on_30mph_road = csv::to_double(speed, "speed_on_30mph");
    p.driver.self_described_aggressive = parse_bool(row[parts.column("self_described_aggressive")], "self_described_aggressive");
    p.driver.frequent_lane_change = parse_bool(row[parts.column("frequent_lane_change")], "frequent_lane_change");
    p.motion_sickness = parse_bool(row[parts.column("motion_sickness")], "motion_sickness").value_or(false);
    p.seat_ordinary = seat(row[parts.column("seat_ordinary")]);
    p.seat_av = seat(row[parts.column("seat_av")]);
    p.seat_av_explained = seat(row[parts.column("seat_av_explained")]);
    p.reason_av = parse_reason(row[parts.column("reason_av")]);
    p.reason_av_explained = parse_reason(row[parts.column("reason_av_explained")]);
    table.participants.push_back(std::move(p));
  }
  validate(table);
  return table;
}

void validate(const ResponseTable& table) {
  std::set<std::string> ids;
  for (const auto& p : table.participants) {
    if (!ids.insert(p.participant_id).second) {
      throw Error(Errc::validation, "duplicate participant " + p.participant_id, "participant_id");
    }
  }
  for (const auto& r : table.ratings) {
    if (!ids.count(r.participant_id)) {
      throw Error(Errc::unknown_id, "rating from unknown participant " + r.participant_id, "participant_id");
    }
    if (!(r.necessity >= 1 && r.necessity <= 10)) throw Error(Errc::validation, "necessity outside 1..10", "necessity");
    if (!(r.attention >= 1 && r.attention <= 10)) throw Error(Errc::validation, "attention outside 1..10", "attention");
    auto sorted = r.content_ranking;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != std::array<double, 4>{1, 2, 3, 4}) {
      throw Error(Errc::validation, r.participant_id + "/" + r.vid + ": content ranking is not a permutation of 1..4",
                  "ranking");
    }
  }
}

StudyReport analyze(const ResponseTable& table, double alpha) {
  validate(table);
  StudyReport report;
  report.alpha = alpha;

  std::map<std::string, const Participant*> participants;
  for (const auto& p : table.participants) participants[p.participant_id] = &p;
  std::map<std::string, bool> aggressive;
  for (const auto& p : table.participants) {
    try {
      auto type = classify_driver(p.participant_id, p.driver);
      aggressive[p.participant_id] = type.kind == DriverKind::aggressive;
      report.drivers.push_back(std::move(type));
    } catch (const Error& e) {
      report.warnings.push_back(std::string("driver type skipped: ") + e.what());
    }
  }

  auto guarded = [&](const std::string& what, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      report.warnings.push_back(what + ": " + e.what());
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  std::vector<double> necessity, attention;
  for (const auto& r : table.ratings) {
    necessity.push_back(r.necessity);
    attention.push_back(r.attention);
  }
  report.pearson_necessity_attention = guarded("pearson necessity/attention", [&] { return pearson(necessity, attention); });

  std::map<std::string, std::pair<double, double>> sums;
  std::map<std::string, int> counts;
  for (const auto& r : table.ratings) {
    sums[r.participant_id].first += r.necessity;
    sums[r.participant_id].second += r.attention;
    ++counts[r.participant_id];
  }
  std::vector<double> cn, ca;
  for (const auto& r : table.ratings) {
    const double c = counts[r.participant_id];
    cn.push_back(r.necessity - sums[r.participant_id].first / c);
    ca.push_back(r.attention - sums[r.participant_id].second / c);
  }
  report.pearson_necessity_attention_centered =
      guarded("pearson necessity/attention (centered)", [&] { return pearson(cn, ca); });

  {
    std::vector<int> b;
    std::vector<double> y;
    for (const auto& r : table.ratings) {
      auto it = aggressive.find(r.participant_id);
      if (it == aggressive.end()) continue;
      b.push_back(it->second ? 1 : 0);
      y.push_back(r.necessity);
    }
    report.pb_necessity_aggressive = guarded("point-biserial necessity/aggressive", [&] { return point_biserial(b, y); });
  }
  {
    std::vector<int> b;
    for (const auto& r : table.ratings) b.push_back(participants.at(r.participant_id)->motion_sickness ? 1 : 0);
    report.pb_necessity_motion_sickness =
        guarded("point-biserial necessity/motion sickness", [&] { return point_biserial(b, necessity); });
  }
  std::set<std::string> flags;
  for (const auto& r : table.ratings)
    for (const auto& [name, _] : r.scenario_flags) flags.insert(name);
  for (const auto& name : flags) {
    std::vector<int> b;
    std::vector<double> y;
    for (const auto& r : table.ratings) {
      auto it = r.scenario_flags.find(name);
      if (it == r.scenario_flags.end()) continue;
      b.push_back(it->second);
      y.push_back(r.necessity);
    }
    report.pb_necessity_scenario[name] = guarded("point-biserial necessity/" + name, [&] { return point_biserial(b, y); });
  }

  std::map<std::string, std::vector<std::vector<double>>> by_vid;
  for (const auto& r : table.ratings)
    by_vid[r.vid].push_back(std::vector<double>(r.content_ranking.begin(), r.content_ranking.end()));
  for (const auto& [vid, rows] : by_vid) {
    if (rows.size() < 2) {
      report.warnings.push_back("friedman skipped for " + vid + ": fewer than 2 subjects");
      continue;
    }
    FriedmanRow row;
    row.vid = vid;
    row.n = rows.size();
    row.result = friedman(rows, alpha);
    for (const auto& r : rows)
      for (std::size_t j = 0; j < 4; ++j) row.mean_ranks[j] += r[j] / static_cast<double>(rows.size());
    if (row.result.reject) ++report.friedman_rejections;
    report.friedman.push_back(row);
  }

  report.transitions = seat_transitions(table.participants);
  return report;
}

namespace {

std::string fmt(double v, int precision = 4) {
  if (std::isnan(v)) return "undefined";
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << v;
  return out.str();
}

}  // namespace

void write_report_markdown(std::ostream& out, const StudyReport& r) {
  out << "# Study statistics\n\n";
  out << "## Correlations with explanation necessity\n\n";
  out << "| variable | method | r |\n|---|---|---|\n";
  out << "| attention | Pearson (pooled) | " << fmt(r.pearson_necessity_attention) << " |\n";
  out << "| attention | Pearson (participant-centered) | " << fmt(r.pearson_necessity_attention_centered) << " |\n";
  out << "| aggressive driver | point-biserial | " << fmt(r.pb_necessity_aggressive) << " |\n";
  out << "| motion sickness | point-biserial | " << fmt(r.pb_necessity_motion_sickness) << " |\n";
  for (const auto& [name, value] : r.pb_necessity_scenario) {
    out << "| scenario: " << name << " | point-biserial | " << fmt(value) << " |\n";
  }
  int aggressive = 0;
  for (const auto& d : r.drivers) aggressive += d.kind == DriverKind::aggressive;
  out << "\n## Driver types\n\n" << aggressive << " aggressive, " << r.drivers.size() - aggressive << " cautious.\n";

  out << "\n## Explanation content preference (Friedman, alpha = " << fmt(r.alpha, 2) << ")\n\n";
  out << "| vid | n | chi2_F | dof | p | reject |\n|---|---|---|---|---|---|\n";
  for (const auto& f : r.friedman) {
    out << "| " << f.vid << " | " << f.n << " | " << fmt(f.result.statistic) << " | " << f.result.dof << " | "
        << fmt(f.result.p_value) << " | " << (f.result.reject ? "yes" : "no") << " |\n";
  }
  out << "\n" << r.friedman_rejections << " of " << r.friedman.size() << " scenarios reject the null hypothesis.\n";

  out << "\n## Seat transitions\n";
  for (const auto& t : r.transitions) {
    out << "\n### " << t.from << " -> " << t.to << "\n\n| from \\ to | front-driver | front-passenger | back |\n|---|---|---|---|\n";
    const auto stochastic = t.row_stochastic();
    for (int i = 0; i < 3; ++i) {
      out << "| " << to_string(static_cast<SeatGroup>(i));
      for (int j = 0; j < 3; ++j) out << " | " << t.counts[i][j] << " (" << fmt(stochastic[i][j], 3) << ")";
      out << " |\n";
    }
    if (t.tallied) {
      out << "\nMovers: " << t.movers << "; relieved " << t.relieved << " (" << fmt(100.0 * t.relieved_fraction(), 1)
          << "%), anxious " << t.anxious << ".\n";
    }
  }
  if (!r.warnings.empty()) {
    out << "\n## Warnings\n\n";
    for (const auto& w : r.warnings) out << "- " << w << "\n";
  }
}

void write_results_csv(std::ostream& out, const StudyReport& r) {
  auto row = [&](const std::string& a, const std::string& s, const std::string& st, double v) {
    std::ostringstream value;
    value << std::setprecision(17) << v;
    csv::write_row(out, {a, s, st, std::isnan(v) ? std::string("nan") : value.str()});
  };
  csv::write_row(out, {"analysis", "subject", "statistic", "value"});
  row("pearson", "necessity~attention", "r", r.pearson_necessity_attention);
  row("pearson_centered", "necessity~attention", "r", r.pearson_necessity_attention_centered);
  row("point_biserial", "necessity~aggressive", "r", r.pb_necessity_aggressive);
  row("point_biserial", "necessity~motion_sickness", "r", r.pb_necessity_motion_sickness);
  for (const auto& [name, v] : r.pb_necessity_scenario) row("point_biserial", "necessity~" + name, "r", v);
  for (const auto& f : r.friedman) {
    row("friedman", f.vid, "chi2", f.result.statistic);
    row("friedman", f.vid, "p", f.result.p_value);
    row("friedman", f.vid, "reject", f.result.reject ? 1.0 : 0.0);
  }
  row("friedman", "all", "rejections", r.friedman_rejections);
  int aggressive = 0;
  for (const auto& d : r.drivers) aggressive += d.kind == DriverKind::aggressive;
  row("driver_type", "all", "aggressive", aggressive);
  row("driver_type", "all", "cautious", static_cast<double>(r.drivers.size()) - aggressive);
  for (const auto& t : r.transitions) {
    const auto subject = t.from + "->" + t.to;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        row("seat_transition", subject,
            std::string(to_string(static_cast<SeatGroup>(i))) + "->" + to_string(static_cast<SeatGroup>(j)),
            t.counts[i][j]);
    if (t.tallied) {
      row("seat_transition", subject, "movers", t.movers);
      row("seat_transition", subject, "relieved", t.relieved);
      row("seat_transition", subject, "anxious", t.anxious);
      row("seat_transition", subject, "relieved_fraction", t.relieved_fraction());
    }
  }
}

}  // namespace xnec::stats
