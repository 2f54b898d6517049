#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dropoutlab/dataset.hpp"
#include "dropoutlab/date.hpp"
#include "dropoutlab/matrix.hpp"

namespace dropoutlab {

enum class FeatureBlock {
  AgeDummies,
  LoeDummies,
  GenderDummies,
  ContinentDummies,
  Clickstream,
  PrecourseSurvey,
  DaysSinceLastAction,
};

struct BlockRange {
  FeatureBlock block;
  std::size_t begin;
  std::size_t size;
};

inline constexpr std::size_t kAgeBins = 13;
inline constexpr std::size_t kLoeSlots = 8;
inline constexpr std::size_t kGenderSlots = 4;
inline constexpr std::size_t kContinentSlots = 8;
inline constexpr std::size_t kDemographicWidth = kAgeBins + kLoeSlots + kGenderSlots + kContinentSlots;

/// Column layout of the feature matrix: demographic one-hot blocks, the 31
/// cumulative clickstream counters, precourse_survey and
/// days_since_last_action (66 columns).
class FeatureSchema {
 public:
  static const FeatureSchema& standard();

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<BlockRange>& blocks() const { return blocks_; }
  std::size_t width() const { return names_.size(); }
  const BlockRange& block(FeatureBlock b) const;
  std::size_t index_of(std::string_view name) const;  // throws SchemaMismatch
  /// FNV-1a over the joined names; used to tag serialized models.
  std::uint64_t hash() const { return hash_; }

  bool operator==(const FeatureSchema& other) const { return names_ == other.names_; }

 private:
  FeatureSchema();
  std::vector<std::string> names_;
  std::vector<BlockRange> blocks_;
  std::uint64_t hash_ = 0;
};

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull);

struct FeatureMatrix {
  const FeatureSchema* schema = &FeatureSchema::standard();
  std::vector<std::string> student_ids;
  Matrix values;
  Date as_of;

  std::size_t rows() const { return values.rows(); }
  /// Copy restricted to the given rows, in the given order.
  FeatureMatrix select_rows(const std::vector<std::size_t>& rows) const;
};

/// Age in whole years for the feature encoding: 2012 - YoB.
int encoded_age(int yob);
/// Age bin slot in [0, 12]; slot 12 is the null slot.
std::size_t age_bin(std::optional<int> yob);

std::array<double, kDemographicWidth> encode_demographics(const StudentDemographics& d);

/// Per-student view of a course's activity, sorted by date. Building it once
/// makes repeated as-of queries cheap.
class ActivityIndex {
 public:
  explicit ActivityIndex(const CourseData& course);
  ActivityIndex(const CourseMeta& meta, std::span<const StudentDemographics> students,
                std::span<const ActivityDay> activity);

  /// Throws Error(UnknownStudent).
  const std::vector<const ActivityDay*>& days_of(const std::string& student_id) const;

  std::array<double, kNumActivityFeatures> cumulative(const std::string& student_id, Date as_of) const;
  double days_since_last_action(const std::string& student_id, Date as_of) const;

 private:
  Date launch_;
  std::vector<std::string> ids_;  // sorted
  std::vector<std::vector<const ActivityDay*>> days_;
  std::size_t locate(const std::string& student_id) const;
};

std::array<double, kNumActivityFeatures> cumulative_clickstream(const CourseData& course,
                                                                const std::string& student_id,
                                                                Date as_of);

/// Whole days since the latest activity with nevents > 0 on or before
/// `as_of`; a student never active by then gets (as_of - launch) + 1.
double days_since_last_action(const CourseData& course, const std::string& student_id, Date as_of);

/// One row per student, sorted by student_id.
FeatureMatrix build_matrix(const CourseData& course, Date as_of);
FeatureMatrix build_matrix(const CourseData& course, const ActivityIndex& index, Date as_of);
FeatureMatrix build_matrix(std::span<const StudentDemographics> students, const ActivityIndex& index, Date as_of);

enum class NormKind { ZScore, Percentile };

struct NormStats {
  NormKind kind = NormKind::ZScore;
  std::uint64_t schema_hash = 0;
  // ZScore: one entry per column.
  std::vector<double> mean;
  std::vector<double> stddev;
  // Percentile: normalized columns and their sorted training values.
  std::vector<std::size_t> columns;
  std::vector<std::vector<double>> reference;

  bool operator==(const NormStats&) const = default;
};

NormStats fit_zscore(const FeatureMatrix& train);
FeatureMatrix apply_zscore(const FeatureMatrix& m, const NormStats& stats);

/// Columns normalized by the percentile scheme: the clickstream block and
/// days_since_last_action. Dummies and precourse_survey pass through.
std::vector<std::size_t> percentile_columns(const FeatureSchema& schema);

NormStats fit_percentile(const FeatureMatrix& train);
FeatureMatrix apply_percentile(const FeatureMatrix& m, const NormStats& stats);

/// Mid-rank percentile of `value` in a sorted reference list:
/// (#less + 0.5 * #equal) / size.
double midrank_percentile(std::span<const double> sorted_reference, double value);

void write_matrix_csv(const FeatureMatrix& m, const std::filesystem::path& path);
std::string norm_stats_to_json(const NormStats& stats);
NormStats norm_stats_from_json(const std::string& text);

}  // namespace dropoutlab
