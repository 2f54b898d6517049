// Acceptance suite: one PASS/FAIL line per criterion.
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dropoutlab/cli.hpp"
#include "dropoutlab/csv.hpp"
#include "dropoutlab/dataset.hpp"
#include "dropoutlab/deepnet.hpp"
#include "dropoutlab/evaluate.hpp"
#include "dropoutlab/features.hpp"
#include "dropoutlab/linear.hpp"
#include "dropoutlab/paradigms.hpp"
#include "dropoutlab/random.hpp"

using namespace dropoutlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Matrix random_matrix(Rng& rng, std::size_t n, std::size_t d) {
  Matrix m(n, d);
  for (auto& v : m.data()) v = rng.normal();
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("dropoutlab_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dropoutlab");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != kExitOk) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<std::string> fa, fb;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) fa.push_back(fs::relative(e.path(), a).string());
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) fb.push_back(fs::relative(e.path(), b).string());
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb || fa.empty()) return false;
  for (const auto& f : fa)
    if (read_file(a / f) != read_file(b / f)) return false;
  return true;
}

// 1. Fast AUC equals brute-force pair counting.
Outcome auc_oracle() {
  Rng rng(1);
  double worst = 0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 2 + rng.uniform_index(199);
    std::vector<double> s(n);
    std::vector<int> y(n);
    const std::uint64_t levels = 1 + rng.uniform_index(20);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.uniform_index(levels)) / 7.0;
      y[i] = rng.bernoulli(0.5);
    }
    y[0] = 1;
    y[1] = 0;
    double num = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (y[i] == 1 && y[j] == 0) {
          pairs += 1;
          num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    worst = std::max(worst, std::abs(auc(s, y) - num / pairs));
  }
  return {worst <= 1e-12, "500 instances, max |fast - brute| = " + fmt("%.3g", worst)};
}

// 2. Net2Wider / Net2Deeper preserve the teacher's outputs.
Outcome function_preservation() {
  Rng rng(2);
  double worst_wide = 0, worst_deep = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = 1 + rng.uniform_index(66);
    std::vector<std::size_t> widths(1 + rng.uniform_index(3));
    for (auto& w : widths) w = 1 + rng.uniform_index(12);
    MlpModel teacher = init_mlp(d, widths, rng.next_u64());
    for (auto& l : teacher.layers)
      for (auto& b : l.bias) b = 0.1 * rng.normal();
    const Matrix x = random_matrix(rng, 1000, d);
    const Matrix ref = forward(teacher, x);
    const std::size_t layer = rng.uniform_index(widths.size());
    const MlpModel wide = net2wider(teacher, layer, widths[layer] + 1 + rng.uniform_index(10), rng.next_u64());
    worst_wide = std::max(worst_wide, max_abs_diff(forward(wide, x), ref));
    const MlpModel deep = net2deeper(teacher, static_cast<int>(rng.uniform_index(widths.size())));
    worst_deep = std::max(worst_deep, max_abs_diff(forward(deep, x), ref));
  }
  return {worst_wide <= 1e-8 && worst_deep <= 1e-12,
          "50 teachers x 1000 inputs, wider max dev " + fmt("%.3g", worst_wide) + ", deeper max dev " +
              fmt("%.3g", worst_deep)};
}

// 3. Analytic gradients match central finite differences.
Outcome gradient_check() {
  Rng rng(3);
  const double h = 1e-6;
  auto rel = [](double fd, double g) { return std::abs(fd - g) / std::max(1.0, std::abs(fd)); };
  double worst_lr = 0, worst_mlp = 0;
  int configs = 0;
  for (int t = 0; t < 100; ++t, ++configs) {
    const std::size_t n = 3 + rng.uniform_index(40), d = 1 + rng.uniform_index(8);
    const Matrix x = random_matrix(rng, n, d);
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng.uniform_index(2));
    std::vector<double> w(d);
    for (auto& v : w) v = rng.normal();
    const double b = rng.normal(), c = std::exp(2 * rng.normal());
    const auto g = logreg_gradient(x, y, c, w, b);
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
      const double fd = (logreg_objective(x, y, c, wp, bp) - logreg_objective(x, y, c, wm, bm)) / (2 * h);
      worst_lr = std::max(worst_lr, rel(fd, g[k]));
    }
  }
  for (int t = 0; t < 100; ++t, ++configs) {
    const std::size_t n = 2 + rng.uniform_index(12), d = 1 + rng.uniform_index(6);
    std::vector<std::size_t> widths(rng.uniform_index(3));
    for (auto& w : widths) w = 1 + rng.uniform_index(6);
    MlpModel m = widths.empty() ? init_softmax_regression(d, rng.next_u64()) : init_mlp(d, widths, rng.next_u64());
    for (auto& l : m.layers)
      for (auto& b : l.bias) b = 0.1 * rng.normal();
    const Matrix x = random_matrix(rng, n, d);
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng.uniform_index(2));
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    MlpModel grad;
    cross_entropy(m, x, y, rows, {}, &grad);
    for (std::size_t li = 0; li < m.layers.size(); ++li) {
      auto& wts = m.layers[li].weights.data();
      for (std::size_t k = 0; k < wts.size(); ++k) {
        const double orig = wts[k];
        wts[k] = orig + h;
        const double fp = cross_entropy(m, x, y, rows, {}, nullptr);
        wts[k] = orig - h;
        const double fm = cross_entropy(m, x, y, rows, {}, nullptr);
        wts[k] = orig;
        worst_mlp = std::max(worst_mlp, rel((fp - fm) / (2 * h), grad.layers[li].weights.data()[k]));
      }
      auto& bias = m.layers[li].bias;
      for (std::size_t k = 0; k < bias.size(); ++k) {
        const double orig = bias[k];
        bias[k] = orig + h;
        const double fp = cross_entropy(m, x, y, rows, {}, nullptr);
        bias[k] = orig - h;
        const double fm = cross_entropy(m, x, y, rows, {}, nullptr);
        bias[k] = orig;
        worst_mlp = std::max(worst_mlp, rel((fp - fm) / (2 * h), grad.layers[li].bias[k]));
      }
    }
  }
  return {worst_lr <= 1e-4 && worst_mlp <= 1e-4, std::to_string(configs) + " configurations, max rel error LR " +
                                                     fmt("%.3g", worst_lr) + ", MLP " + fmt("%.3g", worst_mlp)};
}

// 4. Logistic regression vs. a 0-hidden-layer softmax network.
Outcome architecture_equivalence() {
  SynthConfig cfg = default_synth_config();
  const CourseData course = synthesize_course(cfg, 42);
  const FeatureMatrix raw = build_matrix(course, week_date(course.meta, WeekIndex{0}));
  const FeatureMatrix x = apply_zscore(raw, fit_zscore(raw));
  const LabelSet labels = derive_labels(course);
  const std::vector<int> y = aligned_labels(x, labels);
  const LinearModel lr = train_logreg(x, labels, 1.0);
  const double auc_lr = auc(predict_proba(lr, x).scores, y);
  SgdConfig sgd;
  sgd.seed = 42;
  const MlpModel net = train_sgd(init_softmax_regression(x.values.cols(), 42), x.values, y, sgd);
  const double auc_net = auc(positive_scores(net, x.values), y);
  return {std::abs(auc_lr - auc_net) <= 0.01,
          "week 0 AUC logreg " + fmt("%.4f", auc_lr) + ", softmax net " + fmt("%.4f", auc_net)};
}

double mean_auc(const EvalReport& r, const std::string& paradigm) {
  double s = 0;
  std::size_t n = 0;
  for (const auto& row : r.rows)
    if (row.paradigm == paradigm) {
      s += row.auc;
      ++n;
    }
  return n ? s / static_cast<double>(n) : std::nan("");
}

EvalReport& default_run() {
  static EvalReport report = [] {
    const auto corpus = synthesize_corpus(default_corpus_config(), 42);
    RunOptions opts;
    opts.seed = 42;
    opts.jobs = 1;
    const std::vector<ParadigmKind> kinds(kAllParadigms.begin(), kAllParadigms.end());
    return run_experiment(corpus, kinds, opts);
  }();
  return report;
}

// 5. Paradigm ordering on the default corpus.
Outcome paradigm_ordering() {
  const auto corpus_cfg = default_corpus_config();
  std::int64_t min_students = corpus_cfg.courses.front().n_students;
  for (const auto& c : corpus_cfg.courses) min_students = std::min(min_students, c.n_students);
  const EvalReport& r = default_run();
  const double ph = mean_auc(r, "posthoc"), is = mean_auc(r, "insitu"), b2 = mean_auc(r, "baseline2"),
               b1 = mean_auc(r, "baseline1");
  const bool pass = corpus_cfg.courses.size() == 8 && min_students >= 2000 && ph > is && is > b2 && b2 > b1 &&
                    ph - b1 >= 0.10;
  return {pass, "posthoc " + fmt("%.4f", ph) + " > insitu " + fmt("%.4f", is) + " > baseline2 " + fmt("%.4f", b2) +
                    " > baseline1 " + fmt("%.4f", b1) + ", gap " + fmt("%.4f", ph - b1) + ", skipped " +
                    std::to_string(r.skipped.size())};
}

// 6. PostHoc AUC rises with the week.
Outcome weekly_trend() {
  const EvalReport& r = default_run();
  std::vector<double> weeks, aucs;
  for (const auto& a : r.aggregates)
    if (a.paradigm == "posthoc") {
      weeks.push_back(a.week);
      aucs.push_back(a.mean_auc);
    }
  const double rho = spearman(weeks, aucs);
  return {weeks.size() >= 2 && rho > 0, std::to_string(weeks.size()) + " weeks, Spearman rho " + fmt("%.4f", rho)};
}

// 7. Corrupting certification labels leaves InSitu scores bitwise unchanged.
Outcome information_hygiene() {
  const auto corpus = synthesize_corpus(default_corpus_config(), 42);
  auto corrupted = corpus;
  Rng rng(7);
  for (auto& c : corrupted) {
    for (auto& [id, g] : c.final_grade) g = rng.uniform();
    for (const auto& s : c.students)
      if (!c.final_grade.count(s.student_id)) c.final_grade[s.student_id] = 1.0;
  }
  std::size_t cells = 0, scores = 0, differing = 0;
  for (const auto& course : corpus) {
    for (auto w : prediction_weeks(course.meta, ParadigmKind::InSitu)) {
      const auto a = run_paradigm(corpus, make_spec(corpus, ParadigmKind::InSitu, course.meta.course_id), w);
      const auto b = run_paradigm(corrupted, make_spec(corrupted, ParadigmKind::InSitu, course.meta.course_id), w);
      ++cells;
      if (a.student_ids != b.student_ids || a.scores.size() != b.scores.size()) {
        ++differing;
        continue;
      }
      for (std::size_t i = 0; i < a.scores.size(); ++i) {
        ++scores;
        differing += std::bit_cast<std::uint64_t>(a.scores[i]) != std::bit_cast<std::uint64_t>(b.scores[i]);
      }
    }
  }
  return {cells > 0 && differing == 0, std::to_string(cells) + " cells, " + std::to_string(scores) +
                                           " scores compared bitwise, " + std::to_string(differing) + " differ"};
}

// 8. Sweep bookkeeping with defaults, cell replay and XOR sanity.
Outcome sweep_bookkeeping() {
  const auto dir = scratch("grow");
  SynthConfig cfg = default_synth_config();
  const CourseData course = synthesize_course(cfg, 42);
  write_course_dir(course, dir / "course");
  if (cli({"grow", "--course-dir", (dir / "course").string(), "--seed", "42", "--out", (dir / "sweep").string()}) !=
      kExitOk)
    return {false, "grow failed"};
  const csv::Table t = csv::read_file(dir / "sweep" / "sweep.csv");
  const auto c_phase = t.column("phase", "sweep.csv"), c_w = t.column("w", "sweep.csv"),
             c_h = t.column("h", "sweep.csv"), c_auc = t.column("auc", "sweep.csv"),
             c_acc = t.column("accuracy", "sweep.csv"), c_seed = t.column("seed", "sweep.csv");
  std::vector<std::size_t> width_w, depth_h;
  for (const auto& r : t.records) {
    if (r[c_phase] == "width" && r[c_h] == "1") width_w.push_back(std::stoul(r[c_w]));
    if (r[c_phase] == "depth") depth_h.push_back(std::stoul(r[c_h]));
  }
  std::vector<std::size_t> want_w(14), want_h(9);
  std::iota(want_w.begin(), want_w.end(), 2);
  std::iota(want_h.begin(), want_h.end(), 2);
  const bool counts_ok = width_w == want_w && depth_h == want_h;

  // Replay every grown cell from its recorded seed.
  const LabeledSplit data = split_course(course, week_date(course.meta, WeekIndex{-1}), 0.5, 42);
  SgdConfig sgd;
  sgd.seed = 42;
  std::size_t replayed = 0, mismatched = 0;
  for (const auto& r : t.records) {
    if (r[c_phase] == "linear") continue;
    const std::size_t w = std::stoul(r[c_w]), h = std::stoul(r[c_h]);
    if (std::stoull(r[c_seed]) != cell_seed(42, r[c_phase], w, h)) ++mismatched;
    const SweepRow row = rerun_cell(data.x_train, data.y_train, data.x_test, data.y_test, GrowthPlan{}, sgd,
                                    r[c_phase], w, h);
    double a = 0, acc = 0;
    csv::parse_number(r[c_auc], a);
    csv::parse_number(r[c_acc], acc);
    mismatched += row.auc != a || row.accuracy != acc;
    ++replayed;
  }

  // XOR: some seeded h=1, w=4 net fits; logistic regression tops out at 3/4.
  Matrix x(4, 2);
  x(1, 1) = 1;
  x(2, 0) = 1;
  x(3, 0) = 1;
  x(3, 1) = 1;
  const std::vector<int> y = {0, 1, 1, 0};
  SgdConfig xor_cfg;
  xor_cfg.epochs = 2000;
  xor_cfg.minibatch_size = 4;
  xor_cfg.learning_rate = 0.5;
  xor_cfg.anneal_factor = 0.0;
  int solved_seed = -1;
  for (int seed = 0; seed < 20 && solved_seed < 0; ++seed) {
    xor_cfg.seed = static_cast<std::uint64_t>(seed);
    const std::size_t widths[] = {4};
    const MlpModel m = train_sgd(init_mlp(2, widths, xor_cfg.seed), x, y, xor_cfg);
    if (raw_accuracy(positive_scores(m, x), y) == 1.0) solved_seed = seed;
  }
  double lr_acc = 0;
  for (double c : {1e-2, 1.0, 1e2, 1e4}) {
    const LinearModel lr = train_logreg(x, y, c);
    int correct = 0;
    const auto z = logits(lr, x);
    for (std::size_t i = 0; i < 4; ++i) correct += (z[i] >= 0) == (y[i] == 1);
    lr_acc = std::max(lr_acc, correct / 4.0);
  }
  const bool pass = counts_ok && mismatched == 0 && replayed == 23 && solved_seed >= 0 && lr_acc <= 0.75;
  return {pass, std::to_string(width_w.size()) + " width rows + " + std::to_string(depth_h.size()) +
                    " depth rows, " + std::to_string(replayed) + " replayed, " + std::to_string(mismatched) +
                    " mismatched; XOR solved by seed " + std::to_string(solved_seed) + ", logreg accuracy " +
                    fmt("%.2f", lr_acc)};
}

// 9. cmd_synth and cmd_run are byte-identical across runs and job counts.
Outcome determinism() {
  const auto dir = scratch("determinism");
  const fs::path config = fs::path(DROPOUTLAB_SOURCE_DIR) / "configs" / "corpus4.json";
  bool ok = cli({"synth", "--config", config.string(), "--seed", "42", "--out", (dir / "synth1").string()}) == kExitOk &&
            cli({"synth", "--config", config.string(), "--seed", "42", "--out", (dir / "synth2").string()}) == kExitOk;
  const bool synth_same = ok && same_tree(dir / "synth1", dir / "synth2");
  std::ofstream(dir / "m.json") << R"({"master_seed": 42, "corpus_dir": "synth1", "paradigms": )"
                                << R"(["posthoc", "samefield", "multicourse", "insitu", "baseline1", "baseline2"],)"
                                << R"( "output_dir": "run", "jobs": 1})";
  const auto m = (dir / "m.json").string();
  ok = cli({"run", "--manifest", m}) == kExitOk;
  fs::rename(dir / "run", dir / "run_a");
  ok = ok && cli({"run", "--manifest", m}) == kExitOk;
  fs::rename(dir / "run", dir / "run_b");
  ok = ok && cli({"run", "--manifest", m, "--jobs", "4"}) == kExitOk;
  fs::rename(dir / "run", dir / "run_c");
  const bool run_same = ok && same_tree(dir / "run_a", dir / "run_b") && same_tree(dir / "run_a", dir / "run_c");
  return {synth_same && run_same, std::string("synth twice ") + (synth_same ? "identical" : "DIFFERENT") +
                                      ", run twice and --jobs 1 vs 4 " + (run_same ? "identical" : "DIFFERENT")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "AUC oracle equivalence", 10, auc_oracle},
      {2, "Net2Net function preservation", 30, function_preservation},
      {3, "gradient correctness", 60, gradient_check},
      {4, "logreg vs 0-hidden-layer net", 0, architecture_equivalence},
      {5, "paradigm ordering", 600, paradigm_ordering},
      {6, "PostHoc weekly trend", 0, weekly_trend},
      {7, "information hygiene", 0, information_hygiene},
      {8, "sweep bookkeeping", 0, sweep_bookkeeping},
      {9, "determinism", 0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      o.pass = false;
      o.detail += " (over the " + fmt("%.0f", c.budget_seconds) + " s budget)";
    }
    std::printf("criterion %d %s: %s - %s [%.2f s]\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
