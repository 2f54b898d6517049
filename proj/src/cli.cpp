#include "dropoutlab/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dropoutlab/dataset.hpp"
#include "dropoutlab/error.hpp"
#include "dropoutlab/evaluate.hpp"
#include "dropoutlab/features.hpp"
#include "dropoutlab/linear.hpp"

namespace dropoutlab {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("DROPOUTLAB_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
  }
  return kDefaultSeed;
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << text;
}

std::vector<std::size_t> range(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> v;
  for (std::size_t i = lo; i <= hi; ++i) v.push_back(i);
  return v;
}

}  // namespace

RunManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::BadConfig, "cannot read manifest " + path.string());
  const fs::path base = path.parent_path();
  RunManifest m;
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::BadConfig, path.string() + ": " + e.what());
  }
  try {
    if (j.contains("paradigms"))
      for (const auto& p : j.at("paradigms")) m.paradigms.push_back(parse_paradigm(p.get<std::string>()));
    if (m.paradigms.empty()) throw Error(Errc::BadConfig, path.string() + ": 'paradigms' must list at least one paradigm");
    if (j.contains("master_seed")) m.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("corpus_config")) m.corpus_config_path = resolve(base, j.at("corpus_config").get<std::string>());
    if (j.contains("corpus_dir")) m.corpus_dir = resolve(base, j.at("corpus_dir").get<std::string>());
    if (m.corpus_config_path && m.corpus_dir)
      throw Error(Errc::BadConfig, path.string() + ": give either corpus_config or corpus_dir, not both");
    if (j.contains("reg_c")) m.reg_c = j.at("reg_c").get<double>();
    if (!j.contains("output_dir")) throw Error(Errc::BadConfig, path.string() + ": missing 'output_dir'");
    m.output_dir = resolve(base, j.at("output_dir").get<std::string>());
    if (j.contains("holdout")) m.holdout = j.at("holdout").get<double>();
    if (j.contains("jobs")) m.jobs = j.at("jobs").get<int>();
    if (j.contains("growth_plan")) {
      const auto& g = j.at("growth_plan");
      GrowthPlan plan;
      if (g.contains("width_sweep")) plan.width_sweep = g.at("width_sweep").get<std::vector<std::size_t>>();
      if (g.contains("depth_sweep")) plan.depth_sweep = g.at("depth_sweep").get<std::vector<std::size_t>>();
      if (g.contains("fixed_width")) plan.fixed_width = g.at("fixed_width").get<std::size_t>();
      plan.validate();
      m.growth_plan = plan;
      if (g.contains("epochs")) m.sgd.epochs = g.at("epochs").get<int>();
    }
  } catch (const json::exception& e) {
    throw Error(Errc::BadConfig, path.string() + ": " + e.what());
  }
  if (!(m.reg_c > 0.0)) throw Error(Errc::BadConfig, path.string() + ": reg_c must be > 0");
  if (!(m.holdout >= 0.0 && m.holdout < 1.0)) throw Error(Errc::BadConfig, path.string() + ": holdout must lie in [0, 1)");
  if (m.jobs < 1) throw Error(Errc::BadConfig, path.string() + ": jobs must be >= 1");
  if (m.corpus_config_path && !fs::exists(*m.corpus_config_path))
    throw Error(Errc::BadConfig, "corpus config " + m.corpus_config_path->string() + " does not exist");
  if (m.corpus_dir && !fs::is_directory(*m.corpus_dir))
    throw Error(Errc::BadConfig, "corpus directory " + m.corpus_dir->string() + " does not exist");
  return m;
}

std::vector<CourseData> load_corpus_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::IoError, dir.string() + " is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory() && fs::exists(entry.path() / "course_meta.csv")) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<CourseData> corpus;
  for (const auto& d : dirs) corpus.push_back(load_course_dir(d));
  if (corpus.empty()) throw Error(Errc::IoError, "no course directories under " + dir.string());
  return corpus;
}

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void cmd_synth(const fs::path& config_path, std::uint64_t seed, const fs::path& out_dir, std::ostream& out) {
  const CorpusConfig config = config_path.empty() ? default_corpus_config() : load_corpus_config(config_path);
  const auto corpus = synthesize_corpus(config, seed);
  for (const auto& course : corpus) write_course_dir(course, out_dir / course.meta.course_id);
  out << "wrote " << corpus.size() << " courses to " << out_dir.string() << "\n";
}

Date resolve_as_of(const CourseData& course, const std::string& as_of, int week) {
  if (!as_of.empty()) return Date::parse(as_of);
  return week_date(course.meta, WeekIndex{week});
}

void cmd_features(const fs::path& course_dir, const std::string& as_of, int week, const std::string& norm,
                  const fs::path& out_path, const fs::path& stats_path, std::ostream& out) {
  const CourseData course = load_course_dir(course_dir);
  const Date date = resolve_as_of(course, as_of, week);
  if (date < course.meta.launch_date || date > course.meta.end_date)
    throw Error(Errc::BadDate, date.iso() + " is outside the course window");
  FeatureMatrix m = build_matrix(course, date);
  std::optional<NormStats> stats;
  if (norm == "zscore") {
    stats = fit_zscore(m);
    m = apply_zscore(m, *stats);
  } else if (norm == "percentile") {
    stats = fit_percentile(m);
    m = apply_percentile(m, *stats);
  }
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_matrix_csv(m, out_path);
  if (stats && !stats_path.empty()) write_text(stats_path, norm_stats_to_json(*stats) + "\n");
  out << "wrote " << m.rows() << "x" << m.values.cols() << " features as of " << date.iso() << " to "
      << out_path.string() << "\n";
}

void cmd_train(const fs::path& course_dir, int week, double reg_c, const fs::path& out_path, std::ostream& out) {
  const CourseData course = load_course_dir(course_dir);
  RunOptions opts;
  opts.reg_c = reg_c;
  const LinearModel m = train_posthoc_model(course, WeekIndex{week}, opts);
  write_text(out_path, linear_model_to_json(m) + "\n");
  out << "trained " << course.meta.course_id << " week " << week << " model -> " << out_path.string() << "\n";
}

struct GrowArgs {
  int week = -1;
  std::size_t width_min = 2, width_max = 15, depth_min = 2, depth_max = 10, fixed_width = 5;
  double test_fraction = 0.5;
  std::string norm = "zscore";
  SgdConfig sgd{};
};

SweepReport grow_course(const CourseData& course, const GrowthPlan& plan, const GrowArgs& a, const fs::path& out_dir) {
  const LabeledSplit data = split_course(course, week_date(course.meta, WeekIndex{a.week}), a.test_fraction, a.sgd.seed,
                                         a.norm == "percentile" ? NormKind::Percentile : NormKind::ZScore);
  SweepReport report = grow_and_train(data.x_train, data.y_train, data.x_test, data.y_test, plan, a.sgd);
  fs::create_directories(out_dir);
  write_sweep_csv(report, out_dir / "sweep.csv");
  write_text(out_dir / "best_model.json", mlp_to_json(report.best_model) + "\n");
  return report;
}

void cmd_run(const fs::path& manifest_path, int jobs_override, std::optional<double> holdout_override,
             std::ostream& out) {
  RunManifest m;
  try {
    m = load_manifest(manifest_path);
  } catch (const Error& e) {
    if (e.code() == Errc::SpecInvalid) throw UsageError(e.what());
    throw;
  }
  std::vector<CourseData> corpus;
  if (m.corpus_dir) {
    corpus = load_corpus_dir(*m.corpus_dir);
  } else {
    const CorpusConfig config = m.corpus_config_path ? load_corpus_config(*m.corpus_config_path) : default_corpus_config();
    corpus = synthesize_corpus(config, m.master_seed);
  }
  RunOptions opts;
  opts.reg_c = m.reg_c;
  opts.holdout = holdout_override.value_or(m.holdout);
  opts.seed = m.master_seed;
  opts.jobs = jobs_override > 0 ? jobs_override : m.jobs;
  const EvalReport report = run_experiment(corpus, m.paradigms, opts);
  emit_report(report, m.output_dir);
  out << summary_table(report);

  if (m.growth_plan) {
    // The sweep runs on the course with the most certifiers.
    const CourseData* best = &corpus.front();
    std::size_t best_count = 0;
    for (const auto& c : corpus) {
      const auto labels = derive_labels(c);
      std::size_t n = 0;
      for (const auto& [id, y] : labels.labels) n += static_cast<std::size_t>(y);
      if (n > best_count) {
        best_count = n;
        best = &c;
      }
    }
    GrowArgs a;
    a.sgd = m.sgd;
    a.sgd.seed = m.master_seed;
    grow_course(*best, *m.growth_plan, a, m.output_dir / "growth");
    out << "growth sweep on " << best->meta.course_id << " -> " << (m.output_dir / "growth").string() << "\n";
  }
}

void cmd_report(const fs::path& rows_path, const fs::path& out_dir, std::ostream& out) {
  EvalReport report;
  report.rows = read_rows_csv(rows_path);
  report.aggregates = aggregate_rows(report.rows);
  emit_report(report, out_dir);
  out << summary_table(report);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dropoutlab: MOOC dropout prediction experiments on clickstream data", "dropoutlab"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  const std::uint64_t seed_default = default_seed();

  // synth
  std::string synth_config, synth_out;
  std::uint64_t synth_seed = seed_default;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic course corpus as CSV files");
  synth->add_option("--config", synth_config, "Corpus config JSON (default: built-in 8-course corpus)");
  synth->add_option("--seed", synth_seed, "Master seed (env DROPOUTLAB_SEED)")->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->required();

  // features
  std::string feat_course, feat_as_of, feat_norm = "none", feat_out, feat_stats;
  int feat_week = 0;
  auto* features = app.add_subcommand("features", "Extract the feature matrix of one course");
  features->add_option("--course-dir", feat_course, "Course directory")->required();
  features->add_option("--week", feat_week, "Week relative to T100% (0 = T100%)")->capture_default_str();
  features->add_option("--as-of", feat_as_of, "Explicit as-of date YYYY-MM-DD (overrides --week)");
  features->add_option("--norm", feat_norm, "none, zscore or percentile")
      ->check(CLI::IsMember({"none", "zscore", "percentile"}))
      ->capture_default_str();
  features->add_option("--out", feat_out, "Output CSV")->required();
  features->add_option("--stats-out", feat_stats, "Write normalization statistics JSON here");

  // train
  std::string train_course, train_out;
  int train_week = 0;
  double train_c = 1.0;
  auto* train = app.add_subcommand("train", "Train a same-course logistic regression model");
  train->add_option("--course-dir", train_course, "Course directory")->required();
  train->add_option("--week", train_week, "Week relative to T100%")->capture_default_str();
  train->add_option("--reg-c", train_c, "Inverse L2 strength C")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--out", train_out, "Model JSON path")->required();

  // run
  std::string run_manifest;
  int run_jobs = 0;
  std::optional<double> run_holdout;
  auto* run = app.add_subcommand("run", "Run a paradigm comparison described by a manifest");
  run->add_option("--manifest", run_manifest, "Manifest JSON")->required();
  run->add_option("--jobs", run_jobs, "Worker threads (overrides the manifest)")->check(CLI::PositiveNumber);
  run->add_option("--holdout", run_holdout, "Fraction of PostHoc students held out for scoring (overrides the manifest; 0 = off)")
      ->check(CLI::Range(0.0, 0.99));

  // grow
  std::string grow_course_dir, grow_out;
  GrowArgs grow_args;
  grow_args.sgd.seed = seed_default;
  auto* grow = app.add_subcommand("grow", "Net2Net width/depth sweep of a feed-forward network on one course");
  grow->add_option("--course-dir", grow_course_dir, "Course directory")->required();
  grow->add_option("--week", grow_args.week, "Prediction week relative to T100%")->capture_default_str();
  grow->add_option("--width-min", grow_args.width_min, "First hidden width")->check(CLI::PositiveNumber)->capture_default_str();
  grow->add_option("--width-max", grow_args.width_max, "Last hidden width")->check(CLI::PositiveNumber)->capture_default_str();
  grow->add_option("--depth-min", grow_args.depth_min, "First depth of the depth sweep")->capture_default_str();
  grow->add_option("--depth-max", grow_args.depth_max, "Last depth of the depth sweep")->capture_default_str();
  grow->add_option("--fixed-width", grow_args.fixed_width, "Width kept during the depth sweep")->capture_default_str();
  grow->add_option("--lr", grow_args.sgd.learning_rate, "SGD learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  grow->add_option("--epochs", grow_args.sgd.epochs, "Epochs per cell (>= 1)")->check(CLI::PositiveNumber)->capture_default_str();
  grow->add_option("--minibatch", grow_args.sgd.minibatch_size, "Minibatch size")->check(CLI::PositiveNumber)->capture_default_str();
  grow->add_option("--anneal", grow_args.sgd.anneal_factor, "Rate is divided by (1 + anneal) after every minibatch")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  grow->add_option("--momentum", grow_args.sgd.momentum, "SGD momentum")->check(CLI::Range(0.0, 0.999))->capture_default_str();
  grow->add_flag("--class-weighting", grow_args.sgd.class_weighting, "Weight the loss by inverse class frequency");
  grow->add_option("--test-fraction", grow_args.test_fraction, "Held-out fraction of students")
      ->check(CLI::Range(0.01, 0.99))
      ->capture_default_str();
  grow->add_option("--norm", grow_args.norm, "zscore or percentile")
      ->check(CLI::IsMember({"zscore", "percentile"}))
      ->capture_default_str();
  grow->add_option("--seed", grow_args.sgd.seed, "Master seed (env DROPOUTLAB_SEED)")->capture_default_str();
  grow->add_option("--out", grow_out, "Output directory")->required();

  // report
  std::string report_rows, report_out;
  auto* report = app.add_subcommand("report", "Re-aggregate a rows.csv into aggregate.csv and summary.txt");
  report->add_option("--rows", report_rows, "rows.csv from a previous run")->required()->check(CLI::ExistingFile);
  report->add_option("--out", report_out, "Output directory")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth) {
      cmd_synth(synth_config, synth_seed, synth_out, out);
    } else if (*features) {
      cmd_features(feat_course, feat_as_of, feat_week, feat_norm, feat_out, feat_stats, out);
    } else if (*train) {
      cmd_train(train_course, train_week, train_c, train_out, out);
    } else if (*run) {
      cmd_run(run_manifest, run_jobs, run_holdout, out);
    } else if (*grow) {
      GrowthPlan plan;
      plan.width_sweep = range(grow_args.width_min, grow_args.width_max);
      plan.depth_sweep = grow_args.depth_max >= grow_args.depth_min ? range(grow_args.depth_min, grow_args.depth_max)
                                                                    : std::vector<std::size_t>{};
      plan.fixed_width = grow_args.fixed_width;
      try {
        plan.validate();
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      const CourseData course = load_course_dir(grow_course_dir);
      const SweepReport r = grow_course(course, plan, grow_args, grow_out);
      const auto& best = r.rows[r.best_row];
      out << "sweep of " << course.meta.course_id << ": " << r.rows.size() << " cells, best " << best.phase
          << " w=" << best.width << " h=" << best.depth << " auc=" << best.auc << "\n";
    } else if (*report) {
      cmd_report(report_rows, report_out, out);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace dropoutlab
