#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dropoutlab/dataset.hpp"
#include "dropoutlab/linear.hpp"

namespace dropoutlab {

/// Mann-Whitney AUC with half credit for ties, via mid-ranks in O(n log n).
/// labels are 1 (positive) / 0. Throws SingleClass if a class is absent.
double auc(std::span<const double> scores, std::span<const int> labels);
/// Aligns by student id; students missing from `labels` count as 0.
double auc(const ScoredStudents& scores, const LabelSet& labels);

/// Sample standard deviation over sqrt(n); 0 for n = 1. Throws EmptyList.
double sem(std::span<const double> values);

/// Fraction of rows with [score >= threshold] == label.
double raw_accuracy(std::span<const double> scores, std::span<const int> labels,
                    double threshold = 0.5);

/// Spearman rank correlation (mid-ranks for ties). 0 when either side is
/// constant.
double spearman(std::span<const double> x, std::span<const double> y);

/// Shuffles (score, label) pairs jointly `trials` times and reports whether
/// the AUC is unchanged every time.
bool label_permutation_invariance_check(std::span<const double> scores, std::span<const int> labels,
                                        int trials, std::uint64_t seed);

struct EvalRow {
  std::string paradigm;
  std::string course_id;
  int week = 0;
  double auc = 0.0;
  double accuracy = 0.0;
  std::size_t n_students = 0;
  std::size_t n_positives = 0;
};

struct EvalAggregate {
  std::string paradigm;
  int week = 0;
  double mean_auc = 0.0;
  double sem = 0.0;
  std::size_t n_courses = 0;
};

struct SkippedCell {
  std::string paradigm;
  std::string course_id;
  int week = 0;
  std::string reason;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<EvalAggregate> aggregates;
  std::vector<SkippedCell> skipped;
};

/// Groups rows by (paradigm, week); paradigms keep their first-appearance
/// order and weeks ascend.
std::vector<EvalAggregate> aggregate_rows(const std::vector<EvalRow>& rows);

/// Writes rows.csv, aggregate.csv and summary.txt into `dir`.
void emit_report(const EvalReport& report, const std::filesystem::path& dir);
/// Reads rows.csv back (accuracy is not part of that file and reads as 0).
std::vector<EvalRow> read_rows_csv(const std::filesystem::path& path);
std::string summary_table(const EvalReport& report);

}  // namespace dropoutlab
