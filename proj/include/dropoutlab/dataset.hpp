#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dropoutlab/date.hpp"

namespace dropoutlab {

enum class Field { SocialSci, Hum, STEM, HealthSci };

enum class Loe { Elementary, JuniorHigh, HighSchool, Associate, Bachelor, Master, Professional };
enum class Gender { Male, Female, Other };
enum class Continent { Europe, Oceania, Africa, Asia, Americas, NorthAmerica, SouthAmerica };

inline constexpr std::array<Field, 4> kAllFields = {Field::SocialSci, Field::Hum, Field::STEM,
                                                    Field::HealthSci};
inline constexpr std::array<Loe, 7> kAllLoe = {Loe::Elementary, Loe::JuniorHigh, Loe::HighSchool,
                                               Loe::Associate,  Loe::Bachelor,   Loe::Master,
                                               Loe::Professional};
inline constexpr std::array<Gender, 3> kAllGenders = {Gender::Male, Gender::Female, Gender::Other};
inline constexpr std::array<Continent, 7> kAllContinents = {
    Continent::Europe,   Continent::Oceania,      Continent::Africa,      Continent::Asia,
    Continent::Americas, Continent::NorthAmerica, Continent::SouthAmerica};

std::string_view to_string(Field f);
std::string_view to_string(Loe v);
std::string_view to_string(Gender v);
std::string_view to_string(Continent v);

// Parsers return nullopt for anything outside the enumerations; for the
// demographic enums that is how unknown categories become null.
std::optional<Field> parse_field(std::string_view text);
std::optional<Loe> parse_loe(std::string_view text);
std::optional<Gender> parse_gender(std::string_view text);
std::optional<Continent> parse_continent(std::string_view text);

struct CourseMeta {
  std::string course_id;
  Date launch_date;  // T0%
  Date end_date;
  Date t100_date;  // earliest date full certification points are attainable
  double cert_threshold = 0.7;
  Field field = Field::STEM;

  /// Throws Error(BadDate) or Error(BadConfig) if the date ordering or the
  /// threshold range is violated.
  void validate() const;
  bool operator==(const CourseMeta&) const = default;
};

struct StudentDemographics {
  std::string student_id;
  std::optional<int> yob;
  std::optional<Loe> loe;
  std::optional<Gender> gender;
  std::optional<Continent> continent;
  bool took_precourse_survey = false;

  bool operator==(const StudentDemographics&) const = default;
};

/// Per-day clickstream counters, in the column order used by activity.csv
/// and by the cumulative clickstream feature block.
inline constexpr std::array<std::string_view, 31> kActivityFeatures = {
    "avg_dt",
    "sdv_dt",
    "max_dt",
    "n_dt",
    "sum_dt",
    "nevents",
    "nprogcheck",
    "nshow_answer",
    "nvideo",
    "nproblem_check",
    "nforum",
    "ntranscript",
    "nseq_goto",
    "nseek_video",
    "npause_video",
    "nvideos_viewed",
    "nvideos_watched_sec",
    "nforum_reads",
    "nforum_posts",
    "nforum_threads",
    "nproblems_answered",
    "nproblems_attempted",
    "nproblems_multiplechoice",
    "nproblems_choice",
    "problems_numerical",
    "nproblems_option",
    "problems_custom",
    "nproblems_string",
    "problems_mixed",
    "nproblems_formula",
    "problems_other",
};
inline constexpr std::size_t kNumActivityFeatures = kActivityFeatures.size();

/// Index of a counter name in kActivityFeatures.
constexpr std::size_t activity_index(std::string_view name) {
  for (std::size_t i = 0; i < kActivityFeatures.size(); ++i)
    if (kActivityFeatures[i] == name) return i;
  return kActivityFeatures.size();
}
inline constexpr std::size_t kNevents = activity_index("nevents");
inline constexpr std::size_t kProblemsAnswered = activity_index("nproblems_answered");

struct ActivityDay {
  std::string student_id;
  Date date;
  std::array<double, kNumActivityFeatures> counters{};

  double nevents() const { return counters[kNevents]; }
  bool operator==(const ActivityDay&) const = default;
};

struct CourseData {
  CourseMeta meta;
  std::vector<StudentDemographics> students;
  std::vector<ActivityDay> activity;
  std::map<std::string, double> final_grade;

  /// Checks every type invariant (dates, counters, membership, uniqueness).
  void validate() const;
  std::size_t participants() const { return students.size(); }
  bool operator==(const CourseData&) const = default;
};

struct LabelSet {
  std::string course_id;
  std::map<std::string, int> labels;  // 1 = certified, 0 = dropout
};

struct CoursePaths {
  std::filesystem::path meta;
  std::filesystem::path demographics;
  std::filesystem::path activity;
  std::filesystem::path grades;

  /// The four canonical file names inside one course directory.
  static CoursePaths in_directory(const std::filesystem::path& dir);
};

CourseData load_course(const std::filesystem::path& meta_path,
                       const std::filesystem::path& demographics_path,
                       const std::filesystem::path& activity_path,
                       const std::filesystem::path& grades_path);
CourseData load_course(const CoursePaths& paths);
CourseData load_course_dir(const std::filesystem::path& dir);

/// Writes the CSV quadruple. Students are written in sorted id order and
/// activity in (student_id, date) order, so output is canonical.
void write_course(const CourseData& course, const CoursePaths& paths);
void write_course_dir(const CourseData& course, const std::filesystem::path& dir);

/// Certification labels. Students without a recorded grade count as grade 0.
LabelSet derive_labels(const CourseData& course);

/// Parameters of the synthetic course generator.
///
/// Each student gets an initial engagement e0 ~ Beta(alpha, beta) (beta = 0
/// means e0 = 1), nudged on the logit scale by a weak demographic score.
/// Engagement then decays geometrically at a per-student daily rate with mean
/// `decay_mean`, and each day the student may quit for good with probability
/// `quit_hazard * (1 - e_t)`. A day is active with probability e_t; active days
/// draw Poisson counters scaled by daily intensity. The final grade is the
/// cumulative number of answered problems, weighted by a per-student answer
/// skill ~ Beta(skill_alpha, skill_beta) (skill_beta = 0 means skill = 1),
/// relative to what a fully engaged student would answer by the end date,
/// divided by `grade_scale`.
struct SynthConfig {
  std::string course_id = "SYN101";
  Field field = Field::STEM;
  Date launch_date = Date::from_ymd(2014, 1, 6);
  int weeks_to_t100 = 8;
  int weeks_after_t100 = 2;
  std::int64_t n_students = 2000;
  double engagement_alpha = 1.2;
  double engagement_beta = 2.0;
  double decay_mean = 0.02;
  double quit_hazard = 0.05;
  double demographic_effect = 0.6;
  double grade_scale = 0.25;
  double skill_alpha = 5.0;
  double skill_beta = 1.5;
  double cert_threshold = 0.7;

  void validate() const;  // throws Error(BadConfig)
};

struct CorpusConfig {
  std::vector<SynthConfig> courses;
};

SynthConfig default_synth_config();
/// Eight courses, two per field, 2000-3000 students each.
CorpusConfig default_corpus_config();

/// Reads a JSON corpus config: {"courses": [{...SynthConfig fields...}]}.
/// Omitted fields take the SynthConfig defaults. Throws Error(BadConfig)
/// with the path in the message on missing files or malformed content.
CorpusConfig load_corpus_config(const std::filesystem::path& path);
std::string corpus_config_to_json(const CorpusConfig& config);

CourseData synthesize_course(const SynthConfig& config, std::uint64_t seed);
std::vector<CourseData> synthesize_corpus(const CorpusConfig& config, std::uint64_t seed);

}  // namespace dropoutlab
