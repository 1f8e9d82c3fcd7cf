#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace xnec::stats {

// Product-moment correlation. Throws Errc::invalid_argument for mismatched
// lengths or fewer than 3 points, Errc::undefined for a constant series.
double pearson(std::span<const double> x, std::span<const double> y);

// Point-biserial correlation of a 0/1 variable with a continuous one, via
// (M1 - M0) / s_n * sqrt(n1 * n0) / n. Throws Errc::undefined when `b` has a
// single class or `y` is constant.
double point_biserial(std::span<const int> b, std::span<const double> y);

// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> midranks(std::span<const double> values);

enum class PValueMethod { chi_square, exact };

struct FriedmanResult {
  double statistic = 0.0;  // tie-corrected chi-square_F
  int dof = 0;
  double p_value = 1.0;
  bool reject = false;
  PValueMethod method = PValueMethod::chi_square;
};

inline constexpr double kAlpha = 0.05;

// Friedman test over an n-subject x k-treatment table of within-row ranks
// (ties mid-ranked). The exact method enumerates the null distribution of the
// rank sums and needs n <= 10, k <= 5 and untied rows.
FriedmanResult friedman(const std::vector<std::vector<double>>& ranks, double alpha = kAlpha,
                        PValueMethod method = PValueMethod::chi_square);

// --- driver typing -------------------------------------------------------

struct DriverAnswers {
  std::optional<double> speed_on_30mph_road;  // mph actually driven where the limit is 30
  std::optional<bool> self_described_aggressive;
  std::optional<bool> frequent_lane_change;
};

enum class DriverKind { cautious, aggressive };
enum class DriverCondition { speeding, self_described, frequent_lane_change };

inline constexpr double kSpeedingThresholdMph = 35.0;

struct DriverType {
  std::string participant_id;
  DriverKind kind = DriverKind::cautious;
  std::vector<DriverCondition> triggered_conditions;
};

const char* to_string(DriverKind kind);
const char* to_string(DriverCondition condition);

// Aggressive iff speed > 35 mph on a 30 mph road, self-described aggressive,
// or frequent unnecessary lane changes. Throws Errc::validation if any
// answer is missing.
DriverType classify_driver(const std::string& participant_id, const DriverAnswers& answers);

// --- seats -----------------------------------------------------------------

// A front driver, B back driver side, C front passenger, D back passenger side.
enum class Seat { A, B, C, D };
enum class SeatGroup { front_driver = 0, front_passenger = 1, back = 2 };
enum class SeatReason { none, comfort, safety, control };

Seat parse_seat(const std::string& code);
SeatGroup group_of(Seat seat);
SeatReason parse_reason(const std::string& code);
const char* to_string(SeatGroup group);

struct Participant {
  std::string participant_id;
  DriverAnswers driver;
  bool motion_sickness = false;
  std::optional<Seat> seat_ordinary;
  std::optional<Seat> seat_av;
  std::optional<Seat> seat_av_explained;
  SeatReason reason_av = SeatReason::none;           // why the seat changed ordinary -> AV
  SeatReason reason_av_explained = SeatReason::none;  // why it changed AV -> AV with explanations
};

struct TransitionMatrix {
  std::string from;
  std::string to;
  std::array<std::array<int, 3>, 3> counts{};  // [from group][to group]
  int movers = 0;
  int relieved = 0;
  int anxious = 0;
  bool tallied = false;  // whether reasons were available for this pair

  std::array<std::array<double, 3>, 3> row_stochastic() const;
  double relieved_fraction() const;  // relieved / movers, 0 when nobody moved
};

// Movers change seat group. Moving into the driver seat or giving a safety or
// control reason counts as anxious; a comfort reason counts as relieved.
// Returns ordinary->AV, AV->AV with explanations, ordinary->AV with explanations.
std::array<TransitionMatrix, 3> seat_transitions(const std::vector<Participant>& participants);

// --- response table and report -------------------------------------------

inline constexpr std::array<const char*, 4> kContentFormats = {
    "action_reason_first", "action_reason_third", "action_first", "action_third"};

struct Rating {
  std::string participant_id;
  std::string vid;
  double necessity = 0.0;  // 1..10
  double attention = 0.0;  // 1..10
  std::array<double, 4> content_ranking{};  // rank per format in kContentFormats order
  std::map<std::string, int> scenario_flags;
};

struct ResponseTable {
  std::vector<Rating> ratings;
  std::vector<Participant> participants;
};

// ratings CSV: participant_id,vid,necessity,attention,rank_<format> x4, flag_<name>...
// participants CSV: participant_id,speed_on_30mph,self_described_aggressive,
//   frequent_lane_change,motion_sickness,seat_ordinary,seat_av,seat_av_explained,
//   reason_av,reason_av_explained   (blank cell = missing answer)
ResponseTable read_responses(const std::filesystem::path& ratings_csv, const std::filesystem::path& participants_csv);
void validate(const ResponseTable& table);

struct FriedmanRow {
  std::string vid;
  std::size_t n = 0;
  FriedmanResult result;
  std::array<double, 4> mean_ranks{};
};

struct StudyReport {
  double pearson_necessity_attention = 0.0;
  double pearson_necessity_attention_centered = 0.0;  // per-participant mean removed first
  double pb_necessity_aggressive = 0.0;
  double pb_necessity_motion_sickness = 0.0;
  std::map<std::string, double> pb_necessity_scenario;  // flag -> correlation
  std::vector<FriedmanRow> friedman;
  int friedman_rejections = 0;
  std::vector<DriverType> drivers;
  std::array<TransitionMatrix, 3> transitions;
  double alpha = kAlpha;
  std::vector<std::string> warnings;
};

StudyReport analyze(const ResponseTable& table, double alpha = kAlpha);
void write_report_markdown(std::ostream& out, const StudyReport& report);
// Machine-readable table: analysis,subject,statistic,value
void write_results_csv(std::ostream& out, const StudyReport& report);

}  // namespace xnec::stats
