#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dropoutlab/dataset.hpp"
#include "dropoutlab/features.hpp"
#include "dropoutlab/matrix.hpp"

namespace dropoutlab {

/// Fully connected layer computing W x + b, W stored as (outputs x inputs).
struct DenseLayer {
  Matrix weights;
  std::vector<double> bias;

  std::size_t inputs() const { return weights.cols(); }
  std::size_t outputs() const { return weights.rows(); }
  bool operator==(const DenseLayer&) const = default;
};

/// Feed-forward classifier: ReLU after every layer but the last, softmax
/// over two classes at the output. Class 1 = certified.
struct MlpModel {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().inputs(); }
  std::size_t hidden_layers() const { return layers.empty() ? 0 : layers.size() - 1; }
  std::vector<std::size_t> hidden_widths() const;
  /// Throws BadShape if consecutive dimensions do not chain or the output is
  /// not 2-wide.
  void validate() const;
  bool operator==(const MlpModel&) const = default;
};

struct SgdConfig {
  double learning_rate = 0.1;
  int epochs = 20;
  std::size_t minibatch_size = 10;
  double anneal_factor = 1e-3;  // rate *= 1 / (1 + anneal_factor) per minibatch
  double momentum = 0.0;
  std::uint64_t seed = 0;
  bool class_weighting = false;

  void validate() const;  // throws BadConfig
};

struct GrowthPlan {
  std::vector<std::size_t> width_sweep = {2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  std::vector<std::size_t> depth_sweep = {2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t fixed_width = 5;

  void validate() const;  // throws BadConfig
};

/// Weights ~ U(-a, a), a = sqrt(6 / (fan_in + fan_out)); biases 0.
MlpModel init_mlp(std::size_t input_dim, std::span<const std::size_t> widths, std::uint64_t seed);
/// Zero-hidden-layer network: a single input -> 2 softmax layer.
MlpModel init_softmax_regression(std::size_t input_dim, std::uint64_t seed);

/// Row-wise class probabilities (n x 2).
Matrix forward(const MlpModel& m, const Matrix& x);
Matrix forward(const MlpModel& m, const FeatureMatrix& x);
/// Probability of class 1 per row.
std::vector<double> positive_scores(const MlpModel& m, const Matrix& x);

/// Mean (optionally class-weighted) cross-entropy over `rows` and, when
/// `grad` is non-null, its gradient in the same layer layout as `m`.
double cross_entropy(const MlpModel& m, const Matrix& x, std::span<const int> y,
                     std::span<const std::size_t> rows, std::span<const double> class_weight,
                     MlpModel* grad);

/// Per-minibatch learning-rate schedule: rate after k steps is
/// base / (1 + anneal)^k.
class AnnealSchedule {
 public:
  AnnealSchedule(double base_rate, double anneal_factor) : base_(base_rate), anneal_(anneal_factor) {}
  double rate() const;
  void step() { ++steps_; }
  std::uint64_t steps() const { return steps_; }

 private:
  double base_;
  double anneal_;
  std::uint64_t steps_ = 0;
};

struct SgdTrace {
  double initial_loss = 0.0;
  std::vector<double> epoch_losses;  // full-data loss after each epoch
  std::uint64_t minibatch_steps = 0;
  double final_rate = 0.0;
};

/// Minibatch SGD on the cross-entropy; minibatches come from a seeded
/// shuffle every epoch and the last batch may be short. Throws SingleClass
/// or NonFiniteLoss.
MlpModel train_sgd(MlpModel m, const Matrix& x, std::span<const int> y, const SgdConfig& cfg,
                   SgdTrace* trace = nullptr);

/// Widens the hidden layer produced by parameter layer `layer_index` to
/// `new_width` units by replicating existing units (chosen by a seeded
/// uniform draw) and dividing their outgoing weights by the replica count.
MlpModel net2wider(const MlpModel& teacher, std::size_t layer_index, std::size_t new_width,
                   std::uint64_t seed);

/// Inserts an identity-initialized ReLU layer after parameter layer
/// `insert_after`, which must be a hidden (ReLU) layer.
MlpModel net2deeper(const MlpModel& teacher, int insert_after);

struct SweepRow {
  std::string phase;  // "linear", "width" or "depth"
  std::size_t width = 0;
  std::size_t depth = 0;
  double auc = 0.0;
  double accuracy = 0.0;
  double train_seconds = 0.0;
  std::uint64_t seed = 0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  MlpModel best_model;
  std::size_t best_row = 0;  // highest test AUC among width/depth rows
};

/// Net2Net growth: a 0-hidden-layer reference row, then h = 1 with widths
/// from plan.width_sweep (each student widened from the previous trained
/// teacher), then the trained w = plan.fixed_width network deepened through
/// plan.depth_sweep. Every cell is retrained with `cfg` and scored on the
/// test set.
SweepReport grow_and_train(const Matrix& x_train, std::span<const int> y_train, const Matrix& x_test,
                           std::span<const int> y_test, const GrowthPlan& plan, const SgdConfig& cfg);

/// Recomputes a single sweep cell by replaying its teacher chain.
SweepRow rerun_cell(const Matrix& x_train, std::span<const int> y_train, const Matrix& x_test,
                    std::span<const int> y_test, const GrowthPlan& plan, const SgdConfig& cfg,
                    const std::string& phase, std::size_t width, std::size_t depth);

/// Seed used for a sweep cell's training shuffle and growth mapping.
std::uint64_t cell_seed(std::uint64_t master, const std::string& phase, std::size_t width,
                        std::size_t depth);

/// Course features at `as_of` split into train/test by a seeded hash of the
/// student id, normalized with statistics of the training part.
struct LabeledSplit {
  Matrix x_train;
  std::vector<int> y_train;
  Matrix x_test;
  std::vector<int> y_test;
  NormStats norm;
};
LabeledSplit split_course(const CourseData& course, Date as_of, double test_fraction, std::uint64_t seed,
                          NormKind norm = NormKind::ZScore);

void write_sweep_csv(const SweepReport& report, const std::filesystem::path& path);
std::string mlp_to_json(const MlpModel& m);
MlpModel mlp_from_json(const std::string& text);

}  // namespace dropoutlab
