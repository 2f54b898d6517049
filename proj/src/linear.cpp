#include "dropoutlab/linear.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include <Eigen/Dense>
#include <json.hpp>

#include "dropoutlab/error.hpp"

namespace dropoutlab {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

namespace {

void check_inputs(const Matrix& x, std::span<const int> y, double reg_c) {
  if (x.rows() != y.size()) throw Error(Errc::SchemaMismatch, "feature rows and labels differ in length");
  if (!(reg_c > 0.0) || !std::isfinite(reg_c)) throw Error(Errc::BadConfig, "C must be a positive finite number");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v != 0 && v != 1) throw Error(Errc::BadConfig, "labels must be 0 or 1");
    (v ? pos : neg) = true;
  }
  if (!pos || !neg) throw Error(Errc::SingleClass, "training labels contain a single class");
}

// Objective restricted to the free coordinates. theta = (w_active..., b).
struct Problem {
  const Matrix& x;
  std::span<const int> y;
  double inv_c;
  std::vector<std::size_t> active;

  std::size_t dim() const { return active.size() + 1; }

  double margin(std::size_t i, const std::vector<double>& theta) const {
    const auto row = x.row(i);
    double z = theta.back();
    for (std::size_t a = 0; a < active.size(); ++a) z += theta[a] * row[active[a]];
    return z;
  }

  double value(const std::vector<double>& theta) const {
    double reg = 0.0;
    for (std::size_t a = 0; a < active.size(); ++a) reg += theta[a] * theta[a];
    double loss = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double z = margin(i, theta);
      loss += y[i] ? softplus(-z) : softplus(z);
    }
    return 0.5 * inv_c * reg + loss;
  }

  // Gradient, and (if hess != nullptr) the Hessian.
  std::vector<double> gradient(const std::vector<double>& theta, Eigen::MatrixXd* hess) const {
    const std::size_t p = dim();
    std::vector<double> g(p, 0.0);
    if (hess) hess->setZero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    std::vector<double> feat(p);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const auto row = x.row(i);
      for (std::size_t a = 0; a < active.size(); ++a) feat[a] = row[active[a]];
      feat[p - 1] = 1.0;
      const double s = sigmoid(margin(i, theta));
      const double r = s - static_cast<double>(y[i]);
      for (std::size_t k = 0; k < p; ++k) g[k] += r * feat[k];
      if (hess) {
        const double wgt = s * (1.0 - s);
        for (std::size_t k = 0; k < p; ++k) {
          const double fk = wgt * feat[k];
          for (std::size_t l = 0; l <= k; ++l) (*hess)(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) += fk * feat[l];
        }
      }
    }
    for (std::size_t a = 0; a < active.size(); ++a) g[a] += inv_c * theta[a];
    if (hess) {
      for (std::size_t k = 0; k < p; ++k)
        for (std::size_t l = 0; l < k; ++l)
          (*hess)(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) =
              (*hess)(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
      for (std::size_t a = 0; a < active.size(); ++a)
        (*hess)(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) += inv_c;
    }
    return g;
  }
};

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

}  // namespace

double logreg_objective(const Matrix& x, std::span<const int> y, double reg_c, std::span<const double> weights,
                        double intercept) {
  Problem p{x, y, 1.0 / reg_c, {}};
  p.active.resize(x.cols());
  std::iota(p.active.begin(), p.active.end(), 0);
  std::vector<double> theta(weights.begin(), weights.end());
  theta.push_back(intercept);
  return p.value(theta);
}

std::vector<double> logreg_gradient(const Matrix& x, std::span<const int> y, double reg_c,
                                    std::span<const double> weights, double intercept) {
  Problem p{x, y, 1.0 / reg_c, {}};
  p.active.resize(x.cols());
  std::iota(p.active.begin(), p.active.end(), 0);
  std::vector<double> theta(weights.begin(), weights.end());
  theta.push_back(intercept);
  return p.gradient(theta, nullptr);
}

LinearModel train_logreg(const Matrix& x, std::span<const int> y, double reg_c, const OptimizerConfig& opt,
                         std::span<const bool> active, TrainSummary* summary) {
  check_inputs(x, y, reg_c);
  if (!active.empty() && active.size() != x.cols())
    throw Error(Errc::SchemaMismatch, "active mask width differs from the feature width");

  Problem prob{x, y, 1.0 / reg_c, {}};
  for (std::size_t j = 0; j < x.cols(); ++j)
    if (active.empty() || active[j]) prob.active.push_back(j);

  const std::size_t p = prob.dim();
  const double tol = opt.tolerance_per_example * static_cast<double>(x.rows());
  std::vector<double> theta(p, 0.0);
  double f = prob.value(theta);
  if (!std::isfinite(f)) throw Error(Errc::NonFiniteLoss, "objective is not finite at w = 0");

  TrainSummary info;
  double gd_step = 1.0;
  Eigen::MatrixXd hess;
  std::vector<double> trial(p);
  for (info.iterations = 0; info.iterations < opt.max_iterations; ++info.iterations) {
    const bool newton = opt.method == OptimizerMethod::Newton;
    const std::vector<double> g = prob.gradient(theta, newton ? &hess : nullptr);
    info.gradient_norm = norm2(g);
    if (!std::isfinite(info.gradient_norm)) throw Error(Errc::NonFiniteLoss, "gradient is not finite");
    if (info.gradient_norm <= tol) {
      info.converged = true;
      break;
    }

    std::vector<double> dir(p);
    double step = 1.0;
    bool have_dir = false;
    if (newton) {
      Eigen::Map<const Eigen::VectorXd> gv(g.data(), static_cast<Eigen::Index>(p));
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        const Eigen::VectorXd d = -ldlt.solve(gv);
        if (d.allFinite() && d.dot(gv) < 0.0) {
          std::copy(d.data(), d.data() + p, dir.begin());
          have_dir = true;
        }
      }
    }
    if (!have_dir) {
      for (std::size_t k = 0; k < p; ++k) dir[k] = -g[k];
      step = std::min(1.0, 2.0 * gd_step);
    }

    double slope = 0.0;
    for (std::size_t k = 0; k < p; ++k) slope += g[k] * dir[k];
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t k = 0; k < p; ++k) trial[k] = theta[k] + step * dir[k];
      f_new = prob.value(trial);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no representable descent left
    if (!have_dir) gd_step = step;
    theta.swap(trial);
    f = f_new;
  }
  info.objective = f;
  if (!std::isfinite(f)) throw Error(Errc::NonFiniteLoss, "objective diverged");
  if (!info.converged) {
    const std::vector<double> g = prob.gradient(theta, nullptr);
    info.gradient_norm = norm2(g);
    info.converged = info.gradient_norm <= tol;
  }
  if (summary) *summary = info;

  LinearModel m;
  m.weights.assign(x.cols(), 0.0);
  for (std::size_t a = 0; a < prob.active.size(); ++a) m.weights[prob.active[a]] = theta[a];
  m.intercept = theta.back();
  m.reg_c = reg_c;
  return m;
}

std::vector<int> aligned_labels(const FeatureMatrix& x, const LabelSet& labels) {
  std::vector<int> y(x.rows(), 0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto it = labels.labels.find(x.student_ids[i]);
    if (it != labels.labels.end()) y[i] = it->second;
  }
  return y;
}

LinearModel train_logreg(const FeatureMatrix& x, const LabelSet& labels, double reg_c, const OptimizerConfig& opt,
                         TrainSummary* summary) {
  const std::vector<int> y = aligned_labels(x, labels);
  LinearModel m = train_logreg(x.values, y, reg_c, opt, {}, summary);
  m.schema_hash = x.schema->hash();
  return m;
}

std::vector<double> logits(const LinearModel& m, const Matrix& x) {
  if (x.cols() != m.weights.size())
    throw Error(Errc::SchemaMismatch, "model has " + std::to_string(m.weights.size()) + " weights but data has " +
                                          std::to_string(x.cols()) + " columns");
  std::vector<double> z(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) z[i] = dot(m.weights, x.row(i)) + m.intercept;
  return z;
}

ScoredStudents predict_proba(const LinearModel& m, const FeatureMatrix& x) {
  if (m.schema_hash != 0 && m.schema_hash != x.schema->hash())
    throw Error(Errc::SchemaMismatch, "model was trained on a different feature schema");
  ScoredStudents out;
  out.student_ids = x.student_ids;
  out.scores = logits(m, x.values);
  for (double& s : out.scores) s = sigmoid(s);
  return out;
}

namespace {

// Sorting first makes the sum independent of input order; pairwise halving
// keeps rounding error at O(log n).
double order_free_sum(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  auto rec = [&](auto&& self, std::size_t lo, std::size_t hi) -> double {
    if (hi - lo == 1) return v[lo];
    const std::size_t mid = lo + (hi - lo) / 2;
    return self(self, lo, mid) + self(self, mid, hi);
  };
  return v.empty() ? 0.0 : rec(rec, 0, v.size());
}

}  // namespace

LinearModel average_hyperplanes(std::span<const LinearModel> models) {
  if (models.empty()) throw Error(Errc::EmptyList, "no models to average");
  const std::size_t d = models.front().weights.size();
  for (const auto& m : models)
    if (m.weights.size() != d || m.schema_hash != models.front().schema_hash)
      throw Error(Errc::SchemaMismatch, "models disagree on the feature schema");
  const double k = static_cast<double>(models.size());
  LinearModel out;
  out.schema_hash = models.front().schema_hash;
  out.weights.resize(d);
  std::vector<double> column(models.size());
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < models.size(); ++i) column[i] = models[i].weights[j];
    out.weights[j] = order_free_sum(column) / k;
  }
  for (std::size_t i = 0; i < models.size(); ++i) column[i] = models[i].intercept;
  out.intercept = order_free_sum(column) / k;
  for (std::size_t i = 0; i < models.size(); ++i) column[i] = models[i].reg_c;
  out.reg_c = order_free_sum(column) / k;
  return out;
}

LinearModel baseline_demographics(const CourseData& course, const LabelSet& labels, double reg_c,
                                  const OptimizerConfig& opt) {
  const FeatureMatrix raw = build_matrix(course, course.meta.launch_date);
  NormStats stats = fit_zscore(raw);
  const FeatureMatrix x = apply_zscore(raw, stats);
  const std::vector<int> y = aligned_labels(x, labels);
  std::vector<bool> mask_storage(x.values.cols(), false);
  for (std::size_t j = 0; j < kDemographicWidth; ++j) mask_storage[j] = true;
  // std::vector<bool> has no contiguous storage; copy into a plain array.
  std::unique_ptr<bool[]> mask(new bool[mask_storage.size()]);
  std::copy(mask_storage.begin(), mask_storage.end(), mask.get());
  LinearModel m = train_logreg(x.values, y, reg_c, opt, std::span<const bool>(mask.get(), mask_storage.size()));
  m.schema_hash = x.schema->hash();
  m.norm = std::move(stats);
  return m;
}

ScoredStudents baseline_recency(const CourseData& course, Date as_of) {
  const ActivityIndex index(course);
  std::vector<std::string> ids;
  for (const auto& s : course.students) ids.push_back(s.student_id);
  std::sort(ids.begin(), ids.end());
  ScoredStudents out;
  for (const auto& id : ids) {
    out.student_ids.push_back(id);
    out.scores.push_back(-index.days_since_last_action(id, as_of));
  }
  return out;
}

std::string linear_model_to_json(const LinearModel& m) {
  using nlohmann::json;
  json j;
  j["schema_hash"] = m.schema_hash;
  j["weights"] = m.weights;
  j["intercept"] = m.intercept;
  j["C"] = m.reg_c;
  j["norm"] = m.norm ? json::parse(norm_stats_to_json(*m.norm)) : json(nullptr);
  return j.dump();
}

LinearModel linear_model_from_json(const std::string& text) {
  using nlohmann::json;
  try {
    const json j = json::parse(text);
    LinearModel m;
    m.schema_hash = j.at("schema_hash").get<std::uint64_t>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.intercept = j.at("intercept").get<double>();
    m.reg_c = j.at("C").get<double>();
    if (j.contains("norm") && !j.at("norm").is_null()) m.norm = norm_stats_from_json(j.at("norm").dump());
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("linear model: ") + e.what());
  }
}

}  // namespace dropoutlab
