#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dropoutlab/dataset.hpp"
#include "dropoutlab/evaluate.hpp"
#include "dropoutlab/linear.hpp"

namespace dropoutlab {

/// Week offset relative to T100%: 0 is T100%, -3 is three weeks before.
struct WeekIndex {
  int value = 0;
  auto operator<=>(const WeekIndex&) const = default;
};

enum class ParadigmKind { PostHoc, SameField, MultiCourse, InSitu, Baseline1, Baseline2 };

inline constexpr std::array<ParadigmKind, 6> kAllParadigms = {
    ParadigmKind::PostHoc, ParadigmKind::SameField, ParadigmKind::MultiCourse,
    ParadigmKind::InSitu,  ParadigmKind::Baseline1, ParadigmKind::Baseline2};

std::string_view to_string(ParadigmKind kind);
/// Accepts the names produced by to_string; throws Error(SpecInvalid).
ParadigmKind parse_paradigm(std::string_view name);

/// t100_date + 7 * w. Throws BeforeLaunch if that precedes the launch.
Date week_date(const CourseMeta& course, WeekIndex w);

/// Weeks with launch <= week_date(w) <= t100, ascending. Clickstream-trained
/// paradigms need one full week of data since launch, InSitu needs two
/// (one for training features, one for proxy labels); baselines can run
/// from launch.
std::vector<WeekIndex> prediction_weeks(const CourseMeta& course, ParadigmKind kind);

struct ProxyLabelSet {
  std::string course_id;
  WeekIndex week;
  std::map<std::string, int> labels;  // 1 = active during week w-1
};

/// Week w-1 is the 7-day window (week_date(w-1), week_date(w)]. A student
/// persisted if any day in it has nevents > 0. Only activity is read.
ProxyLabelSet proxy_labels(const CourseMeta& meta, std::span<const StudentDemographics> students,
                           std::span<const ActivityDay> activity, WeekIndex w);
ProxyLabelSet proxy_labels(const CourseData& course, WeekIndex w);

struct ParadigmSpec {
  ParadigmKind kind = ParadigmKind::PostHoc;
  std::string target_course;
  std::vector<std::string> source_courses;
};

/// Fills in sources: SameField takes the largest other course of the
/// target's field (ties by course_id), MultiCourse takes every other course.
ParadigmSpec make_spec(std::span<const CourseData> corpus, ParadigmKind kind,
                       const std::string& target_course);
void validate_spec(std::span<const CourseData> corpus, const ParadigmSpec& spec);

struct RunOptions {
  double reg_c = 1.0;
  OptimizerConfig optimizer{};
  /// Fraction of PostHoc students held out for scoring; 0 = train and score
  /// the same population.
  double holdout = 0.0;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// Source courses that lack week w are trained at their earliest eligible
/// week instead.
WeekIndex aligned_source_week(const CourseMeta& source, WeekIndex w);

/// Model of a course at week w trained on its own z-scored features and
/// certification labels.
LinearModel train_posthoc_model(const CourseData& course, WeekIndex w, const RunOptions& opts);

/// In-situ scorer. Its inputs are deliberately limited to metadata,
/// demographics and activity, so certification outcomes cannot reach it.
ScoredStudents score_insitu(const CourseMeta& meta, std::span<const StudentDemographics> students,
                            std::span<const ActivityDay> activity, WeekIndex w, double reg_c,
                            const OptimizerConfig& opt = {});

ScoredStudents run_paradigm(std::span<const CourseData> corpus, const ParadigmSpec& spec, WeekIndex w,
                            const RunOptions& opts = {});

/// Every course x paradigm x eligible week, scored by AUC against true
/// certification labels; cells where a class is missing are skipped and
/// recorded. Output order is (paradigm, course_id, week) for any `jobs`.
EvalReport run_experiment(std::span<const CourseData> corpus, std::span<const ParadigmKind> kinds,
                          const RunOptions& opts = {});

}  // namespace dropoutlab
