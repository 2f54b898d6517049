#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dropoutlab/error.hpp"
#include "dropoutlab/features.hpp"
#include "dropoutlab/random.hpp"
#include "fixtures.hpp"

using namespace dropoutlab;

namespace {

FeatureMatrix column_matrix(std::initializer_list<double> values, std::size_t col) {
  FeatureMatrix m;
  m.values = Matrix(values.size(), FeatureSchema::standard().width());
  std::size_t r = 0;
  for (double v : values) {
    m.student_ids.push_back("s" + std::to_string(r));
    m.values(r++, col) = v;
  }
  return m;
}

std::size_t nevents_col() { return FeatureSchema::standard().index_of("nevents"); }

const std::vector<double>& reference_of(const NormStats& s, std::size_t col) {
  const auto it = std::find(s.columns.begin(), s.columns.end(), col);
  REQUIRE(it != s.columns.end());
  return s.reference[static_cast<std::size_t>(it - s.columns.begin())];
}

}  // namespace

TEST_CASE("schema has 66 columns in the documented block order") {
  const auto& s = FeatureSchema::standard();
  CHECK(s.width() == 66);
  CHECK(s.block(FeatureBlock::AgeDummies).size == 13);
  CHECK(s.block(FeatureBlock::LoeDummies).size == 8);
  CHECK(s.block(FeatureBlock::GenderDummies).size == 4);
  CHECK(s.block(FeatureBlock::ContinentDummies).size == 8);
  CHECK(s.block(FeatureBlock::Clickstream).size == 31);
  CHECK(s.names()[64] == "precourse_survey");
  CHECK(s.names()[65] == "days_since_last_action");
  CHECK_THROWS_AS(s.index_of("nope"), Error);
}

TEST_CASE("encode_demographics") {
  SUBCASE("yob 1990 is age 22, bin [20,25)") {
    StudentDemographics d;
    d.yob = 1990;
    const auto v = encode_demographics(d);
    const auto& names = FeatureSchema::standard().names();
    for (std::size_t i = 0; i < kAgeBins; ++i) CHECK(v[i] == (names[i] == "age_20_25" ? 1.0 : 0.0));
  }
  SUBCASE("yob 1997 is age 15, bin [15,20)") {
    CHECK(encoded_age(1997) == 15);
    CHECK(FeatureSchema::standard().names()[age_bin(1997)] == "age_15_20");
  }
  SUBCASE("all null: each block hot at its null slot") {
    const auto v = encode_demographics(StudentDemographics{});
    const auto& s = FeatureSchema::standard();
    for (auto b : {FeatureBlock::AgeDummies, FeatureBlock::LoeDummies, FeatureBlock::GenderDummies,
                   FeatureBlock::ContinentDummies}) {
      const auto& r = s.block(b);
      double sum = 0;
      for (std::size_t i = 0; i < r.size; ++i) sum += v[r.begin + i];
      CHECK(sum == 1.0);
      CHECK(v[r.begin + r.size - 1] == 1.0);
      CHECK(s.names()[r.begin + r.size - 1].ends_with("null"));
    }
  }
  SUBCASE("every block is one-hot for random students") {
    Rng rng(9);
    for (int t = 0; t < 200; ++t) {
      StudentDemographics d;
      if (rng.bernoulli(0.8)) d.yob = 1900 + static_cast<int>(rng.uniform_index(120));
      if (rng.bernoulli(0.8)) d.loe = static_cast<Loe>(rng.uniform_index(7));
      if (rng.bernoulli(0.8)) d.gender = static_cast<Gender>(rng.uniform_index(3));
      if (rng.bernoulli(0.8)) d.continent = static_cast<Continent>(rng.uniform_index(7));
      const auto v = encode_demographics(d);
      for (const auto& r : FeatureSchema::standard().blocks()) {
        if (r.block == FeatureBlock::Clickstream || r.block == FeatureBlock::PrecourseSurvey ||
            r.block == FeatureBlock::DaysSinceLastAction)
          continue;
        double sum = 0;
        for (std::size_t i = 0; i < r.size; ++i) sum += v[r.begin + i];
        CHECK(sum == 1.0);
      }
    }
  }
}

TEST_CASE("cumulative_clickstream is a prefix sum including as_of") {
  CourseData c = fixtures::course(2);
  const Date d1 = c.meta.launch_date + 1;
  SUBCASE("[1,2,3] through day 3 sums to 6") {
    for (int i = 0; i < 3; ++i) c.activity.push_back(fixtures::day("s0", d1 + i, i + 1));
    CHECK(cumulative_clickstream(c, "s0", d1 + 2)[kNevents] == 6);
  }
  SUBCASE("[5,0,4] through day 2 is 5") {
    c.activity.push_back(fixtures::day("s0", d1, 5));
    c.activity.push_back(fixtures::day("s0", d1 + 1, 0));
    c.activity.push_back(fixtures::day("s0", d1 + 2, 4));
    CHECK(cumulative_clickstream(c, "s0", d1 + 1)[kNevents] == 5);
  }
  SUBCASE("before first activity is all zero") {
    c.activity.push_back(fixtures::day("s0", d1 + 5, 2));
    for (double v : cumulative_clickstream(c, "s0", d1 + 4)) CHECK(v == 0.0);
  }
  SUBCASE("unknown student") {
    CHECK_THROWS_WITH_AS(cumulative_clickstream(c, "zz", d1), doctest::Contains("UnknownStudent"), Error);
  }
}

TEST_CASE("days_since_last_action") {
  CourseData c = fixtures::course(2);
  const Date d = c.meta.launch_date + 10;
  c.activity.push_back(fixtures::day("s0", d, 1));
  c.activity.push_back(fixtures::day("s0", d + 5, 0));  // a zero-event day is not an action
  CHECK(days_since_last_action(c, "s0", d) == 0);
  CHECK(days_since_last_action(c, "s0", d + 3) == 3);
  CHECK(days_since_last_action(c, "s0", d + 6) == 6);
  CHECK(days_since_last_action(c, "s1", c.meta.launch_date + 9) == 10);
}

TEST_CASE("build_matrix shape, order and determinism") {
  CourseData c = fixtures::course(2);
  c.students[0].took_precourse_survey = true;
  c.activity.push_back(fixtures::day("s1", c.meta.launch_date + 2, 4));
  const Date as_of = c.meta.launch_date + 7;
  const FeatureMatrix m = build_matrix(c, as_of);
  CHECK(m.values.rows() == 2);
  CHECK(m.values.cols() == 66);
  CHECK(m.student_ids == std::vector<std::string>{"s0", "s1"});
  CHECK(m.values(0, 64) == 1.0);
  CHECK(m.values(1, nevents_col()) == 4);
  CHECK(m.values(1, 65) == 5);
  CHECK(m.values(0, 65) == 8);
  CHECK(build_matrix(c, as_of).values == m.values);
}

TEST_CASE("clickstream features never look past as_of") {
  SynthConfig cfg = default_synth_config();
  cfg.n_students = 100;
  CourseData c = synthesize_course(cfg, 4);
  const Date as_of = c.meta.launch_date + 20;
  const FeatureMatrix before = build_matrix(c, as_of);
  for (auto& a : c.activity)
    if (a.date > as_of) a.counters[kNevents] += 1000;
  CHECK(build_matrix(c, as_of).values == before.values);
}

TEST_CASE("fit_zscore") {
  const std::size_t col = nevents_col();
  SUBCASE("[1,2,3] -> mean 2, population std sqrt(2/3)") {
    const NormStats s = fit_zscore(column_matrix({1, 2, 3}, col));
    CHECK(s.mean[col] == doctest::Approx(2.0));
    CHECK(s.stddev[col] == doctest::Approx(std::sqrt(2.0 / 3.0)));
  }
  SUBCASE("constant column") {
    const NormStats s = fit_zscore(column_matrix({5, 5}, col));
    CHECK(s.mean[col] == 5.0);
    CHECK(s.stddev[col] == 0.0);
  }
  SUBCASE("single row") {
    const NormStats s = fit_zscore(column_matrix({7}, col));
    for (double sd : s.stddev) CHECK(sd == 0.0);
  }
  SUBCASE("empty") { CHECK_THROWS_AS(fit_zscore(FeatureMatrix{}), Error); }
}

TEST_CASE("apply_zscore") {
  SynthConfig cfg = default_synth_config();
  cfg.n_students = 200;
  const CourseData c = synthesize_course(cfg, 2);
  const FeatureMatrix m = build_matrix(c, c.meta.t100_date);
  const NormStats s = fit_zscore(m);
  const FeatureMatrix z = apply_zscore(m, s);
  for (std::size_t j = 0; j < 66; ++j) {
    double mean = 0, sq = 0;
    for (std::size_t i = 0; i < z.rows(); ++i) mean += z.values(i, j);
    mean /= z.rows();
    for (std::size_t i = 0; i < z.rows(); ++i) sq += (z.values(i, j) - mean) * (z.values(i, j) - mean);
    const double sd = std::sqrt(sq / z.rows());
    if (s.stddev[j] > 0) {
      CHECK(mean == doctest::Approx(0.0).epsilon(1e-9).scale(1.0));
      CHECK(sd == doctest::Approx(1.0).epsilon(1e-9));
    } else {
      for (std::size_t i = 0; i < z.rows(); ++i) CHECK(z.values(i, j) == 0.0);
    }
  }
  FeatureMatrix far = column_matrix({1e9}, nevents_col());
  const FeatureMatrix zf = apply_zscore(far, s);
  CHECK(std::isfinite(zf.values(0, nevents_col())));
  CHECK(zf.values(0, nevents_col()) > 10);
}

TEST_CASE("fit_percentile keeps sorted references with duplicates") {
  const std::size_t col = nevents_col();
  CHECK(reference_of(fit_percentile(column_matrix({10, 20, 30}, col)), col) == std::vector<double>{10, 20, 30});
  CHECK(reference_of(fit_percentile(column_matrix({30, 10, 20}, col)), col) == std::vector<double>{10, 20, 30});
  CHECK(reference_of(fit_percentile(column_matrix({5, 5, 7}, col)), col) == std::vector<double>{5, 5, 7});
}

TEST_CASE("midrank percentile") {
  const std::vector<double> ref = {10, 20, 30};
  CHECK(midrank_percentile(ref, 20) == doctest::Approx(0.5));
  CHECK(midrank_percentile(ref, 5) == 0.0);
  CHECK(midrank_percentile(ref, 99) == 1.0);
  const std::vector<double> same = {4, 4, 4, 4};
  CHECK(midrank_percentile(same, 4) == 0.5);
  // Brute-force oracle on random references.
  Rng rng(12);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> r(1 + rng.uniform_index(30));
    for (auto& v : r) v = static_cast<double>(rng.uniform_index(8));
    std::sort(r.begin(), r.end());
    const double x = static_cast<double>(rng.uniform_index(10));
    double below = 0, equal = 0;
    for (double v : r) {
      below += v < x;
      equal += v == x;
    }
    CHECK(midrank_percentile(r, x) == doctest::Approx((below + 0.5 * equal) / r.size()));
  }
}

TEST_CASE("apply_percentile maps clickstream and recency columns into [0,1]") {
  SynthConfig cfg = default_synth_config();
  cfg.n_students = 150;
  const CourseData c = synthesize_course(cfg, 6);
  const FeatureMatrix m = build_matrix(c, c.meta.launch_date + 30);
  const NormStats s = fit_percentile(m);
  const FeatureMatrix p = apply_percentile(m, s);
  const auto cols = percentile_columns(FeatureSchema::standard());
  CHECK(cols.size() == 32);
  for (std::size_t j : cols)
    for (std::size_t i = 0; i < p.rows(); ++i) {
      CHECK(p.values(i, j) >= 0.0);
      CHECK(p.values(i, j) <= 1.0);
    }
  CHECK(p.values(3, 0) == m.values(3, 0));  // dummies untouched
}

TEST_CASE("norm stats JSON round trip and schema check") {
  SynthConfig cfg = default_synth_config();
  cfg.n_students = 40;
  const CourseData c = synthesize_course(cfg, 6);
  const FeatureMatrix m = build_matrix(c, c.meta.t100_date);
  for (const NormStats& s : {fit_zscore(m), fit_percentile(m)}) {
    const NormStats back = norm_stats_from_json(norm_stats_to_json(s));
    CHECK(back.kind == s.kind);
    CHECK(back.mean == s.mean);
    CHECK(back.stddev == s.stddev);
    CHECK(back.reference == s.reference);
  }
  NormStats bad = fit_zscore(m);
  bad.schema_hash ^= 1;
  CHECK_THROWS_WITH_AS(apply_zscore(m, bad), doctest::Contains("SchemaMismatch"), Error);
}
