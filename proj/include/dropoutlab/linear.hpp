#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dropoutlab/dataset.hpp"
#include "dropoutlab/features.hpp"
#include "dropoutlab/matrix.hpp"

namespace dropoutlab {

enum class OptimizerMethod { Newton, GradientDescent };

/// Full-batch deterministic optimizer for the regularized log-loss. Both
/// methods use Armijo backtracking and stop once the gradient norm falls to
/// `tolerance_per_example * n`.
struct OptimizerConfig {
  OptimizerMethod method = OptimizerMethod::Newton;
  double tolerance_per_example = 1e-6;
  int max_iterations = 10000;
};

struct LinearModel {
  std::vector<double> weights;
  double intercept = 0.0;
  double reg_c = 1.0;
  std::optional<NormStats> norm;
  std::uint64_t schema_hash = 0;
};

struct ScoredStudents {
  std::vector<std::string> student_ids;
  std::vector<double> scores;  // higher = more likely to certify
};

struct TrainSummary {
  int iterations = 0;
  double gradient_norm = 0.0;
  double objective = 0.0;
  bool converged = false;
};

/// (1/C) * 0.5 * |w|^2 + sum_i logloss(y_i, sigmoid(w.x_i + b)).
double logreg_objective(const Matrix& x, std::span<const int> y, double reg_c,
                        std::span<const double> weights, double intercept);

/// Gradient of logreg_objective; the last entry is d/d(intercept).
std::vector<double> logreg_gradient(const Matrix& x, std::span<const int> y, double reg_c,
                                    std::span<const double> weights, double intercept);

double sigmoid(double z);
double softplus(double z);

/// Core trainer. `active` (when non-empty) marks which weights are free;
/// the others stay exactly 0. Throws SingleClass or NonFiniteLoss.
LinearModel train_logreg(const Matrix& x, std::span<const int> y, double reg_c,
                         const OptimizerConfig& opt = {}, std::span<const bool> active = {},
                         TrainSummary* summary = nullptr);

/// Aligns `labels` to the matrix rows by student id (missing => 0) and
/// trains. The returned model carries no NormStats; callers attach the
/// statistics they normalized with.
LinearModel train_logreg(const FeatureMatrix& x, const LabelSet& labels, double reg_c,
                         const OptimizerConfig& opt = {}, TrainSummary* summary = nullptr);

std::vector<int> aligned_labels(const FeatureMatrix& x, const LabelSet& labels);

std::vector<double> logits(const LinearModel& m, const Matrix& x);
/// sigmoid(w.x + b) per row; throws SchemaMismatch on width mismatch.
ScoredStudents predict_proba(const LinearModel& m, const FeatureMatrix& x);

/// Element-wise mean of weights and intercepts, accumulated in list order.
/// The result has no NormStats.
LinearModel average_hyperplanes(std::span<const LinearModel> models);

/// Logistic regression on the 33 demographic dummies only, z-scored on the
/// course; all other weights are exactly 0.
LinearModel baseline_demographics(const CourseData& course, const LabelSet& labels, double reg_c,
                                  const OptimizerConfig& opt = {});

/// score = -days_since_last_action at `as_of`. No training.
ScoredStudents baseline_recency(const CourseData& course, Date as_of);

std::string linear_model_to_json(const LinearModel& m);
LinearModel linear_model_from_json(const std::string& text);

}  // namespace dropoutlab
