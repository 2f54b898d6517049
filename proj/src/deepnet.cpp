#include "dropoutlab/deepnet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "dropoutlab/csv.hpp"
#include "dropoutlab/error.hpp"
#include "dropoutlab/evaluate.hpp"
#include "dropoutlab/linear.hpp"
#include "dropoutlab/random.hpp"

namespace dropoutlab {

std::vector<std::size_t> MlpModel::hidden_widths() const {
  std::vector<std::size_t> w;
  for (std::size_t k = 0; k + 1 < layers.size(); ++k) w.push_back(layers[k].outputs());
  return w;
}

void MlpModel::validate() const {
  if (layers.empty()) throw Error(Errc::BadShape, "network has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.bias.size() != l.outputs()) throw Error(Errc::BadShape, "bias length differs from layer width");
    if (k > 0 && l.inputs() != layers[k - 1].outputs())
      throw Error(Errc::BadShape, "layer " + std::to_string(k) + " does not chain with its predecessor");
  }
  if (layers.back().outputs() != 2) throw Error(Errc::BadShape, "output layer must have 2 units");
}

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(Errc::BadConfig, "learning rate must be > 0");
  if (epochs < 1) throw Error(Errc::BadConfig, "epochs must be >= 1");
  if (minibatch_size < 1) throw Error(Errc::BadConfig, "minibatch size must be >= 1");
  if (!(anneal_factor >= 0.0)) throw Error(Errc::BadConfig, "anneal factor must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(Errc::BadConfig, "momentum must lie in [0, 1)");
}

void GrowthPlan::validate() const {
  auto increasing = [](const std::vector<std::size_t>& v) {
    return std::adjacent_find(v.begin(), v.end(), [](auto a, auto b) { return a >= b; }) == v.end();
  };
  if (width_sweep.empty()) throw Error(Errc::BadConfig, "width sweep is empty");
  if (!increasing(width_sweep) || !increasing(depth_sweep))
    throw Error(Errc::BadConfig, "sweeps must be strictly increasing");
  if (width_sweep.front() < 1) throw Error(Errc::BadConfig, "widths must be >= 1");
  if (!depth_sweep.empty() && depth_sweep.front() < 2) throw Error(Errc::BadConfig, "depths must be >= 2");
  if (!depth_sweep.empty() && std::find(width_sweep.begin(), width_sweep.end(), fixed_width) == width_sweep.end())
    throw Error(Errc::BadConfig, "fixed width " + std::to_string(fixed_width) + " is not part of the width sweep");
}

namespace {

DenseLayer glorot_layer(std::size_t inputs, std::size_t outputs, Rng& rng) {
  DenseLayer l{Matrix(outputs, inputs), std::vector<double>(outputs, 0.0)};
  const double a = std::sqrt(6.0 / static_cast<double>(inputs + outputs));
  for (double& w : l.weights.data()) w = (2.0 * rng.uniform() - 1.0) * a;
  return l;
}

}  // namespace

MlpModel init_mlp(std::size_t input_dim, std::span<const std::size_t> widths, std::uint64_t seed) {
  if (widths.empty()) throw Error(Errc::BadShape, "at least one hidden layer width is required");
  if (input_dim == 0) throw Error(Errc::BadShape, "input dimension must be positive");
  for (std::size_t w : widths)
    if (w == 0) throw Error(Errc::BadShape, "hidden widths must be positive");
  Rng rng(seed);
  MlpModel m;
  std::size_t prev = input_dim;
  for (std::size_t w : widths) {
    m.layers.push_back(glorot_layer(prev, w, rng));
    prev = w;
  }
  m.layers.push_back(glorot_layer(prev, 2, rng));
  return m;
}

MlpModel init_softmax_regression(std::size_t input_dim, std::uint64_t seed) {
  if (input_dim == 0) throw Error(Errc::BadShape, "input dimension must be positive");
  Rng rng(seed);
  MlpModel m;
  m.layers.push_back(glorot_layer(input_dim, 2, rng));
  return m;
}

namespace {

// Pre-activations of every layer for one input row.
void forward_row(const MlpModel& m, std::span<const double> x, std::vector<std::vector<double>>& pre,
                 std::vector<std::vector<double>>& act) {
  const std::size_t L = m.layers.size();
  pre.resize(L);
  act.resize(L + 1);
  act[0].assign(x.begin(), x.end());
  for (std::size_t k = 0; k < L; ++k) {
    const auto& layer = m.layers[k];
    auto& z = pre[k];
    z.resize(layer.outputs());
    for (std::size_t o = 0; o < layer.outputs(); ++o) z[o] = dot(layer.weights.row(o), act[k]) + layer.bias[o];
    auto& a = act[k + 1];
    a.resize(z.size());
    if (k + 1 < L) {
      for (std::size_t o = 0; o < z.size(); ++o) a[o] = z[o] > 0.0 ? z[o] : 0.0;
    } else {
      const double mx = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (std::size_t o = 0; o < z.size(); ++o) sum += std::exp(z[o] - mx);
      const double lse = mx + std::log(sum);
      for (std::size_t o = 0; o < z.size(); ++o) a[o] = std::exp(z[o] - lse);
    }
  }
}

double log_softmax_at(const std::vector<double>& z, int cls) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - mx);
  return z[static_cast<std::size_t>(cls)] - (mx + std::log(sum));
}

void zero_like(const MlpModel& m, MlpModel& g) {
  g.layers.resize(m.layers.size());
  for (std::size_t k = 0; k < m.layers.size(); ++k) {
    g.layers[k].weights = Matrix(m.layers[k].outputs(), m.layers[k].inputs());
    g.layers[k].bias.assign(m.layers[k].outputs(), 0.0);
  }
}

void check_labels(const Matrix& x, std::span<const int> y) {
  if (x.rows() != y.size()) throw Error(Errc::SchemaMismatch, "feature rows and labels differ in length");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v != 0 && v != 1) throw Error(Errc::BadConfig, "labels must be 0 or 1");
    (v ? pos : neg) = true;
  }
  if (!pos || !neg) throw Error(Errc::SingleClass, "training labels contain a single class");
}

}  // namespace

Matrix forward(const MlpModel& m, const Matrix& x) {
  if (x.cols() != m.input_dim())
    throw Error(Errc::SchemaMismatch, "network expects " + std::to_string(m.input_dim()) + " inputs, data has " +
                                          std::to_string(x.cols()));
  Matrix out(x.rows(), 2);
  std::vector<std::vector<double>> pre, act;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    forward_row(m, x.row(i), pre, act);
    out(i, 0) = act.back()[0];
    out(i, 1) = act.back()[1];
  }
  return out;
}

Matrix forward(const MlpModel& m, const FeatureMatrix& x) { return forward(m, x.values); }

std::vector<double> positive_scores(const MlpModel& m, const Matrix& x) {
  const Matrix p = forward(m, x);
  std::vector<double> s(p.rows());
  for (std::size_t i = 0; i < p.rows(); ++i) s[i] = p(i, 1);
  return s;
}

double cross_entropy(const MlpModel& m, const Matrix& x, std::span<const int> y, std::span<const std::size_t> rows,
                     std::span<const double> class_weight, MlpModel* grad) {
  if (rows.empty()) return 0.0;
  if (grad) zero_like(m, *grad);
  const std::size_t L = m.layers.size();
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  std::vector<std::vector<double>> pre, act;
  std::vector<double> delta, prev_delta;
  double loss = 0.0;
  for (std::size_t r : rows) {
    forward_row(m, x.row(r), pre, act);
    const int cls = y[r];
    const double cw = class_weight.empty() ? 1.0 : class_weight[static_cast<std::size_t>(cls)];
    loss -= cw * log_softmax_at(pre.back(), cls);
    if (!grad) continue;
    delta = act.back();
    delta[static_cast<std::size_t>(cls)] -= 1.0;
    for (double& d : delta) d *= cw * inv_n;
    for (std::size_t k = L; k-- > 0;) {
      auto& gl = grad->layers[k];
      const auto& input = act[k];
      for (std::size_t o = 0; o < delta.size(); ++o) {
        auto grow = gl.weights.row(o);
        for (std::size_t i = 0; i < input.size(); ++i) grow[i] += delta[o] * input[i];
        gl.bias[o] += delta[o];
      }
      if (k == 0) break;
      const auto& W = m.layers[k].weights;
      prev_delta.assign(W.cols(), 0.0);
      for (std::size_t o = 0; o < delta.size(); ++o) {
        const auto wrow = W.row(o);
        for (std::size_t i = 0; i < wrow.size(); ++i) prev_delta[i] += wrow[i] * delta[o];
      }
      for (std::size_t i = 0; i < prev_delta.size(); ++i)
        if (!(pre[k - 1][i] > 0.0)) prev_delta[i] = 0.0;
      delta.swap(prev_delta);
    }
  }
  return loss * inv_n;
}

double AnnealSchedule::rate() const {
  return base_ * std::pow(1.0 + anneal_, -static_cast<double>(steps_));
}

MlpModel train_sgd(MlpModel m, const Matrix& x, std::span<const int> y, const SgdConfig& cfg, SgdTrace* trace) {
  cfg.validate();
  m.validate();
  check_labels(x, y);
  if (x.cols() != m.input_dim()) throw Error(Errc::SchemaMismatch, "data width differs from the network input");

  std::vector<double> class_weight;
  if (cfg.class_weighting) {
    const double n = static_cast<double>(y.size());
    const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
    class_weight = {n / (2.0 * (n - pos)), n / (2.0 * pos)};
  }

  std::vector<std::size_t> all(x.rows());
  std::iota(all.begin(), all.end(), 0);
  auto full_loss = [&] {
    const double l = cross_entropy(m, x, y, all, class_weight, nullptr);
    if (!std::isfinite(l)) throw Error(Errc::NonFiniteLoss, "training loss diverged");
    return l;
  };

  SgdTrace local;
  SgdTrace& tr = trace ? *trace : local;
  tr = SgdTrace{};
  tr.initial_loss = full_loss();

  AnnealSchedule schedule(cfg.learning_rate, cfg.anneal_factor);
  MlpModel grad, velocity;
  if (cfg.momentum > 0.0) zero_like(m, velocity);
  std::vector<std::size_t> order = all;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
    for (std::size_t start = 0; start < order.size(); start += cfg.minibatch_size) {
      const std::size_t len = std::min(cfg.minibatch_size, order.size() - start);
      cross_entropy(m, x, y, std::span<const std::size_t>(order.data() + start, len), class_weight, &grad);
      const double rate = schedule.rate();
      for (std::size_t k = 0; k < m.layers.size(); ++k) {
        auto& w = m.layers[k].weights.data();
        auto& b = m.layers[k].bias;
        const auto& gw = grad.layers[k].weights.data();
        const auto& gb = grad.layers[k].bias;
        if (cfg.momentum > 0.0) {
          auto& vw = velocity.layers[k].weights.data();
          auto& vb = velocity.layers[k].bias;
          for (std::size_t i = 0; i < w.size(); ++i) w[i] += (vw[i] = cfg.momentum * vw[i] - rate * gw[i]);
          for (std::size_t i = 0; i < b.size(); ++i) b[i] += (vb[i] = cfg.momentum * vb[i] - rate * gb[i]);
        } else {
          for (std::size_t i = 0; i < w.size(); ++i) w[i] -= rate * gw[i];
          for (std::size_t i = 0; i < b.size(); ++i) b[i] -= rate * gb[i];
        }
      }
      schedule.step();
    }
    tr.epoch_losses.push_back(full_loss());
  }
  tr.minibatch_steps = schedule.steps();
  tr.final_rate = schedule.rate();
  return m;
}

MlpModel net2wider(const MlpModel& teacher, std::size_t layer_index, std::size_t new_width, std::uint64_t seed) {
  teacher.validate();
  if (layer_index + 1 >= teacher.layers.size())
    throw Error(Errc::BadLayer, "layer " + std::to_string(layer_index) + " is not a hidden layer");
  const DenseLayer& in = teacher.layers[layer_index];
  const DenseLayer& out = teacher.layers[layer_index + 1];
  const std::size_t old_width = in.outputs();
  if (new_width < old_width)
    throw Error(Errc::ShrinkNotAllowed, "cannot narrow a layer from " + std::to_string(old_width) + " to " +
                                            std::to_string(new_width) + " units");

  Rng rng(seed);
  std::vector<std::size_t> source(new_width);
  std::vector<double> replicas(old_width, 1.0);
  for (std::size_t j = 0; j < new_width; ++j) {
    source[j] = j < old_width ? j : static_cast<std::size_t>(rng.uniform_index(old_width));
    if (j >= old_width) replicas[source[j]] += 1.0;
  }

  MlpModel student = teacher;
  DenseLayer wide{Matrix(new_width, in.inputs()), std::vector<double>(new_width)};
  DenseLayer next{Matrix(out.outputs(), new_width), out.bias};
  for (std::size_t j = 0; j < new_width; ++j) {
    const std::size_t s = source[j];
    std::copy_n(in.weights.row(s).begin(), in.inputs(), wide.weights.row(j).begin());
    wide.bias[j] = in.bias[s];
    for (std::size_t o = 0; o < out.outputs(); ++o) next.weights(o, j) = out.weights(o, s) / replicas[s];
  }
  student.layers[layer_index] = std::move(wide);
  student.layers[layer_index + 1] = std::move(next);
  return student;
}

MlpModel net2deeper(const MlpModel& teacher, int insert_after) {
  teacher.validate();
  if (insert_after < 0) throw Error(Errc::BadLayer, "cannot insert a layer directly after the input");
  const auto k = static_cast<std::size_t>(insert_after);
  if (k + 1 >= teacher.layers.size())
    throw Error(Errc::BadLayer, "layer " + std::to_string(k) + " feeds the softmax output, not a ReLU");
  const std::size_t width = teacher.layers[k].outputs();
  DenseLayer identity{Matrix(width, width), std::vector<double>(width, 0.0)};
  for (std::size_t i = 0; i < width; ++i) identity.weights(i, i) = 1.0;
  MlpModel student = teacher;
  student.layers.insert(student.layers.begin() + static_cast<std::ptrdiff_t>(k + 1), std::move(identity));
  return student;
}

std::uint64_t cell_seed(std::uint64_t master, const std::string& phase, std::size_t width, std::size_t depth) {
  return mix_seed(mix_seed(master, fnv1a64(phase)), (static_cast<std::uint64_t>(width) << 32) | depth);
}

namespace {

struct CellTarget {
  std::string phase;
  std::size_t width = 0;
  std::size_t depth = 0;
};

// Runs the sweep; when `stop` is given, returns right after that cell.
SweepReport run_sweep(const Matrix& x_train, std::span<const int> y_train, const Matrix& x_test,
                      std::span<const int> y_test, const GrowthPlan& plan, const SgdConfig& cfg,
                      const CellTarget* stop) {
  plan.validate();
  cfg.validate();
  SweepReport report;
  double best_auc = -1.0;

  auto finish = [&](const std::string& phase, std::size_t w, std::size_t h, MlpModel model,
                    std::uint64_t seed) -> std::pair<MlpModel, bool> {
    SgdConfig c = cfg;
    c.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    model = train_sgd(std::move(model), x_train, y_train, c);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::vector<double> scores = positive_scores(model, x_test);
    SweepRow row{phase, w, h, auc(scores, y_test), raw_accuracy(scores, y_test), secs, seed};
    if (phase != "linear" && row.auc > best_auc) {
      best_auc = row.auc;
      report.best_model = model;
      report.best_row = report.rows.size();
    }
    report.rows.push_back(row);
    const bool done = stop && stop->phase == phase && stop->width == w && stop->depth == h;
    return {std::move(model), done};
  };

  {
    const std::uint64_t seed = cell_seed(cfg.seed, "linear", 0, 0);
    if (finish("linear", 0, 0, init_softmax_regression(x_train.cols(), seed), seed).second) return report;
  }

  MlpModel teacher, fixed;
  for (std::size_t i = 0; i < plan.width_sweep.size(); ++i) {
    const std::size_t w = plan.width_sweep[i];
    const std::uint64_t seed = cell_seed(cfg.seed, "width", w, 1);
    const std::size_t widths[] = {w};
    MlpModel student = i == 0 ? init_mlp(x_train.cols(), widths, seed) : net2wider(teacher, 0, w, seed);
    auto [trained, done] = finish("width", w, 1, std::move(student), seed);
    if (done) return report;
    if (w == plan.fixed_width) fixed = trained;
    teacher = std::move(trained);
  }

  teacher = std::move(fixed);
  for (std::size_t h : plan.depth_sweep) {
    const std::uint64_t seed = cell_seed(cfg.seed, "depth", plan.fixed_width, h);
    MlpModel student = teacher;
    while (student.hidden_layers() < h)
      student = net2deeper(student, static_cast<int>(student.hidden_layers()) - 1);
    auto [trained, done] = finish("depth", plan.fixed_width, h, std::move(student), seed);
    if (done) return report;
    teacher = std::move(trained);
  }
  if (stop) throw Error(Errc::BadConfig, "no sweep cell " + stop->phase + " w=" + std::to_string(stop->width) +
                                             " h=" + std::to_string(stop->depth));
  return report;
}

}  // namespace

SweepReport grow_and_train(const Matrix& x_train, std::span<const int> y_train, const Matrix& x_test,
                           std::span<const int> y_test, const GrowthPlan& plan, const SgdConfig& cfg) {
  return run_sweep(x_train, y_train, x_test, y_test, plan, cfg, nullptr);
}

SweepRow rerun_cell(const Matrix& x_train, std::span<const int> y_train, const Matrix& x_test,
                    std::span<const int> y_test, const GrowthPlan& plan, const SgdConfig& cfg,
                    const std::string& phase, std::size_t width, std::size_t depth) {
  const CellTarget target{phase, width, depth};
  return run_sweep(x_train, y_train, x_test, y_test, plan, cfg, &target).rows.back();
}

LabeledSplit split_course(const CourseData& course, Date as_of, double test_fraction, std::uint64_t seed,
                          NormKind norm) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error(Errc::BadConfig, "test fraction must lie in (0, 1)");
  const FeatureMatrix raw = build_matrix(course, as_of);
  const LabelSet labels = derive_labels(course);
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const double u = static_cast<double>(mix_seed(seed, fnv1a64(raw.student_ids[i])) >> 11) * 0x1.0p-53;
    (u < test_fraction ? test_rows : train_rows).push_back(i);
  }
  const FeatureMatrix train = raw.select_rows(train_rows);
  const FeatureMatrix test = raw.select_rows(test_rows);
  LabeledSplit out;
  if (norm == NormKind::ZScore) {
    out.norm = fit_zscore(train);
    out.x_train = apply_zscore(train, out.norm).values;
    out.x_test = apply_zscore(test, out.norm).values;
  } else {
    out.norm = fit_percentile(train);
    out.x_train = apply_percentile(train, out.norm).values;
    out.x_test = apply_percentile(test, out.norm).values;
  }
  out.y_train = aligned_labels(train, labels);
  out.y_test = aligned_labels(test, labels);
  return out;
}

void write_sweep_csv(const SweepReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  csv::write_row(out, {"phase", "w", "h", "auc", "accuracy", "train_seconds", "seed"});
  for (const auto& r : report.rows)
    csv::write_row(out, {r.phase, std::to_string(r.width), std::to_string(r.depth), csv::format_number(r.auc),
                         csv::format_number(r.accuracy), csv::format_number(r.train_seconds),
                         std::to_string(r.seed)});
}

std::string mlp_to_json(const MlpModel& m) {
  using nlohmann::json;
  json layers = json::array();
  for (const auto& l : m.layers)
    layers.push_back({{"rows", l.outputs()}, {"cols", l.inputs()}, {"weights", l.weights.data()}, {"bias", l.bias}});
  return json{{"input_dim", m.input_dim()},
              {"hidden_activation", "relu"},
              {"output_activation", "softmax"},
              {"layers", layers}}
      .dump();
}

MlpModel mlp_from_json(const std::string& text) {
  using nlohmann::json;
  try {
    const json j = json::parse(text);
    MlpModel m;
    for (const auto& l : j.at("layers")) {
      const auto rows = l.at("rows").get<std::size_t>();
      const auto cols = l.at("cols").get<std::size_t>();
      DenseLayer layer{Matrix(rows, cols), l.at("bias").get<std::vector<double>>()};
      const auto w = l.at("weights").get<std::vector<double>>();
      if (w.size() != rows * cols) throw Error(Errc::BadShape, "weight array does not match its shape");
      layer.weights.data() = w;
      m.layers.push_back(std::move(layer));
    }
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("network model: ") + e.what());
  }
}

}  // namespace dropoutlab
