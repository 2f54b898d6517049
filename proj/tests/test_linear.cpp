#include <doctest.h>

#include <cmath>
#include <limits>

#include "dropoutlab/error.hpp"
#include "dropoutlab/linear.hpp"
#include "dropoutlab/random.hpp"
#include "fixtures.hpp"

using namespace dropoutlab;

namespace {

struct Toy {
  Matrix x;
  std::vector<int> y;
};

Toy random_problem(Rng& rng, std::size_t n, std::size_t d) {
  Toy t{Matrix(n, d), std::vector<int>(n)};
  std::vector<double> w(d);
  for (auto& v : w) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) t.x(i, j) = rng.normal();
    t.y[i] = rng.bernoulli(sigmoid(dot(t.x.row(i), w))) ? 1 : 0;
  }
  t.y[0] = 0;
  t.y[1] = 1;
  return t;
}

double norm2(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("logreg gradient matches central finite differences") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng.uniform_index(6);
    Toy t = random_problem(rng, 5 + rng.uniform_index(30), d);
    std::vector<double> w(d);
    for (auto& v : w) v = rng.normal();
    const double b = rng.normal();
    const double c = std::exp(rng.normal());
    const auto g = logreg_gradient(t.x, t.y, c, w, b);
    const double h = 1e-6;
    for (std::size_t k = 0; k <= d; ++k) {
      auto wp = w, wm = w;
      double bp = b, bm = b;
      if (k < d) {
        wp[k] += h;
        wm[k] -= h;
      } else {
        bp += h;
        bm -= h;
      }
      const double fd =
          (logreg_objective(t.x, t.y, c, wp, bp) - logreg_objective(t.x, t.y, c, wm, bm)) / (2 * h);
      CHECK(std::abs(fd - g[k]) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("1-D separable data gives a positive weight matching a grid search") {
  Matrix x(2, 1);
  x(0, 0) = -1;
  x(1, 0) = 1;
  const std::vector<int> y = {0, 1};
  const LinearModel m = train_logreg(x, y, 1.0);
  CHECK(m.weights[0] > 0);
  // Brute-force minimizer over a fine grid (intercept 0 by symmetry).
  double best_w = 0, best_f = std::numeric_limits<double>::infinity();
  for (double w = -5; w <= 5; w += 1e-4) {
    const double f = logreg_objective(x, y, 1.0, std::vector<double>{w}, 0.0);
    if (f < best_f) {
      best_f = f;
      best_w = w;
    }
  }
  CHECK(m.weights[0] == doctest::Approx(best_w).epsilon(1e-3));
  CHECK(std::abs(m.intercept) < 1e-6);
}

TEST_CASE("single class is rejected") {
  Matrix x(3, 2, 1.0);
  const std::vector<int> y = {1, 1, 1};
  CHECK_THROWS_WITH_AS(train_logreg(x, y, 1.0), doctest::Contains("SingleClass"), Error);
}

TEST_CASE("stronger regularization shrinks the weights") {
  Rng rng(5);
  Toy t = random_problem(rng, 200, 5);
  const LinearModel strong = train_logreg(t.x, t.y, 1e-4);
  const LinearModel weak = train_logreg(t.x, t.y, 1e2);
  CHECK(norm2(strong.weights) < norm2(weak.weights));
}

TEST_CASE("Newton and gradient descent reach the same optimum") {
  Rng rng(8);
  Toy t = random_problem(rng, 120, 4);
  TrainSummary sn, sg;
  const LinearModel newton = train_logreg(t.x, t.y, 1.0, {}, {}, &sn);
  OptimizerConfig gd;
  gd.method = OptimizerMethod::GradientDescent;
  const LinearModel desc = train_logreg(t.x, t.y, 1.0, gd, {}, &sg);
  CHECK(sn.converged);
  CHECK(sg.converged);
  for (std::size_t j = 0; j < 4; ++j) CHECK(newton.weights[j] == doctest::Approx(desc.weights[j]).epsilon(1e-3));
  const auto g = logreg_gradient(t.x, t.y, 1.0, newton.weights, newton.intercept);
  CHECK(norm2(g) <= 1e-6 * 120);
}

TEST_CASE("masked weights stay exactly zero") {
  Rng rng(2);
  Toy t = random_problem(rng, 100, 4);
  const bool mask[] = {true, false, true, false};
  const LinearModel m = train_logreg(t.x, t.y, 1.0, {}, mask);
  CHECK(m.weights[1] == 0.0);
  CHECK(m.weights[3] == 0.0);
  CHECK(m.weights[0] != 0.0);
}

TEST_CASE("predict_proba") {
  FeatureMatrix x;
  x.student_ids = {"a", "b"};
  x.values = Matrix(2, 66, 1.0);
  LinearModel m;
  m.weights.assign(66, 0.0);
  m.schema_hash = FeatureSchema::standard().hash();
  SUBCASE("zero model scores 0.5") {
    for (double s : predict_proba(m, x).scores) CHECK(s == 0.5);
  }
  SUBCASE("huge logits saturate without overflow") {
    m.intercept = 1e6;
    for (double s : predict_proba(m, x).scores) CHECK(s == 1.0);
    m.intercept = -1e6;
    for (double s : predict_proba(m, x).scores) CHECK(s == 0.0);
  }
  SUBCASE("schema mismatch") {
    m.weights.resize(10);
    CHECK_THROWS_WITH_AS(predict_proba(m, x), doctest::Contains("SchemaMismatch"), Error);
  }
}

TEST_CASE("average_hyperplanes") {
  LinearModel a;
  a.weights = {1.0, -2.0, 0.5};
  a.intercept = 0.25;
  SUBCASE("single model is identity") {
    const LinearModel m = average_hyperplanes(std::vector<LinearModel>{a});
    CHECK(m.weights == a.weights);
    CHECK(m.intercept == a.intercept);
  }
  SUBCASE("w and -w cancel") {
    LinearModel b = a;
    for (auto& w : b.weights) w = -w;
    b.intercept = -a.intercept;
    const LinearModel m = average_hyperplanes(std::vector<LinearModel>{a, b});
    for (double w : m.weights) CHECK(w == 0.0);
  }
  SUBCASE("permutation invariant bitwise") {
    Rng rng(3);
    std::vector<LinearModel> ms(7);
    for (auto& m : ms) {
      m.weights.resize(5);
      for (auto& w : m.weights) w = rng.normal() * 1e3;
      m.intercept = rng.normal();
    }
    const LinearModel ref = average_hyperplanes(ms);
    std::reverse(ms.begin(), ms.end());
    std::swap(ms[1], ms[4]);
    const LinearModel perm = average_hyperplanes(ms);
    CHECK(perm.weights == ref.weights);
    CHECK(perm.intercept == ref.intercept);
  }
  SUBCASE("errors") {
    CHECK_THROWS_WITH_AS(average_hyperplanes(std::vector<LinearModel>{}), doctest::Contains("EmptyList"), Error);
    LinearModel b;
    b.weights = {1.0};
    CHECK_THROWS_WITH_AS(average_hyperplanes(std::vector<LinearModel>{a, b}), doctest::Contains("SchemaMismatch"),
                         Error);
  }
}

TEST_CASE("baseline_demographics puts positive weight on the certifying gender") {
  CourseData c = fixtures::course(200);
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    auto& s = c.students[static_cast<std::size_t>(i)];
    s.gender = i % 2 ? Gender::Female : Gender::Male;
    const double p = s.gender == Gender::Female ? 0.8 : 0.2;
    c.final_grade[s.student_id] = rng.bernoulli(p) ? 0.9 : 0.1;
    c.activity.push_back(fixtures::day(s.student_id, c.meta.launch_date + 1 + (i % 30), 1 + i % 5));
  }
  const LinearModel m = baseline_demographics(c, derive_labels(c), 1.0);
  const auto& schema = FeatureSchema::standard();
  CHECK(m.weights[schema.index_of("gender_female")] > 0);
  CHECK(m.weights[schema.index_of("gender_male")] < 0);
  for (std::size_t j = kDemographicWidth; j < schema.width(); ++j) CHECK(m.weights[j] == 0.0);
  REQUIRE(m.norm.has_value());
}

TEST_CASE("baseline_recency") {
  CourseData c = fixtures::course(3);
  const Date today = c.meta.launch_date + 20;
  c.activity.push_back(fixtures::day("s0", today, 1));
  c.activity.push_back(fixtures::day("s1", today - 5, 1));
  c.activity.push_back(fixtures::day("s2", today - 5, 3));
  const ScoredStudents s = baseline_recency(c, today);
  CHECK(s.student_ids == std::vector<std::string>{"s0", "s1", "s2"});
  CHECK(s.scores[0] > s.scores[1]);
  CHECK(s.scores[1] == s.scores[2]);
}

TEST_CASE("linear model JSON round trip") {
  Rng rng(6);
  Toy t = random_problem(rng, 50, 3);
  LinearModel m = train_logreg(t.x, t.y, 0.5);
  m.schema_hash = 77;
  const LinearModel back = linear_model_from_json(linear_model_to_json(m));
  CHECK(back.weights == m.weights);
  CHECK(back.intercept == m.intercept);
  CHECK(back.reg_c == m.reg_c);
  CHECK(back.schema_hash == 77);
}
