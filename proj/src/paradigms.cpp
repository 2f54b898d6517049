#include "dropoutlab/paradigms.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <set>
#include <thread>

#include "dropoutlab/error.hpp"
#include "dropoutlab/features.hpp"
#include "dropoutlab/random.hpp"

namespace dropoutlab {

std::string_view to_string(ParadigmKind kind) {
  switch (kind) {
    case ParadigmKind::PostHoc: return "posthoc";
    case ParadigmKind::SameField: return "samefield";
    case ParadigmKind::MultiCourse: return "multicourse";
    case ParadigmKind::InSitu: return "insitu";
    case ParadigmKind::Baseline1: return "baseline1";
    case ParadigmKind::Baseline2: return "baseline2";
  }
  return "";
}

ParadigmKind parse_paradigm(std::string_view name) {
  for (ParadigmKind k : kAllParadigms)
    if (to_string(k) == name) return k;
  throw Error(Errc::SpecInvalid, "unknown paradigm '" + std::string(name) +
                                     "' (expected posthoc, samefield, multicourse, insitu, baseline1 or baseline2)");
}

Date week_date(const CourseMeta& course, WeekIndex w) {
  const Date d = course.t100_date + 7 * static_cast<std::int64_t>(w.value);
  if (d < course.launch_date)
    throw Error(Errc::BeforeLaunch, course.course_id + ": week " + std::to_string(w.value) + " falls on " + d.iso() +
                                        ", before the launch " + course.launch_date.iso());
  return d;
}

namespace {

// Days of clickstream data needed between launch and the prediction date.
std::int64_t required_days(ParadigmKind kind) {
  switch (kind) {
    case ParadigmKind::Baseline1:
    case ParadigmKind::Baseline2: return 0;
    case ParadigmKind::InSitu: return 14;
    default: return 7;
  }
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  const std::int64_t q = a / b;
  return (a % b != 0 && ((a < 0) == (b < 0))) ? q + 1 : q;
}

}  // namespace

std::vector<WeekIndex> prediction_weeks(const CourseMeta& course, ParadigmKind kind) {
  const std::int64_t gap = course.t100_date - course.launch_date;
  const std::int64_t first = ceil_div(required_days(kind) - gap, 7);
  std::vector<WeekIndex> weeks;
  for (std::int64_t w = first; w <= 0; ++w) weeks.push_back(WeekIndex{static_cast<int>(w)});
  return weeks;
}

ProxyLabelSet proxy_labels(const CourseMeta& meta, std::span<const StudentDemographics> students,
                           std::span<const ActivityDay> activity, WeekIndex w) {
  if (w.value > 0)
    throw Error(Errc::WindowOutOfRange, meta.course_id + ": week " + std::to_string(w.value) + " is after T100%");
  const Date window_end = meta.t100_date + 7 * static_cast<std::int64_t>(w.value);
  const Date window_start = window_end - 7;  // exclusive
  if (window_start < meta.launch_date)
    throw Error(Errc::WindowOutOfRange, meta.course_id + ": week " + std::to_string(w.value - 1) +
                                            " starts before the launch");
  ProxyLabelSet out;
  out.course_id = meta.course_id;
  out.week = w;
  for (const auto& s : students) out.labels[s.student_id] = 0;
  for (const auto& a : activity) {
    if (a.date > window_start && a.date <= window_end && a.nevents() > 0.0) {
      const auto it = out.labels.find(a.student_id);
      if (it == out.labels.end()) throw Error(Errc::UnknownStudent, "activity for unknown student '" + a.student_id + "'");
      it->second = 1;
    }
  }
  return out;
}

ProxyLabelSet proxy_labels(const CourseData& course, WeekIndex w) {
  return proxy_labels(course.meta, course.students, course.activity, w);
}

namespace {

const CourseData& find_course(std::span<const CourseData> corpus, const std::string& id) {
  for (const auto& c : corpus)
    if (c.meta.course_id == id) return c;
  throw Error(Errc::SpecInvalid, "course '" + id + "' is not in the corpus");
}

std::vector<std::string> sorted_ids(std::span<const CourseData> corpus) {
  std::vector<std::string> ids;
  for (const auto& c : corpus) ids.push_back(c.meta.course_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string largest_same_field(std::span<const CourseData> corpus, const CourseData& target) {
  const CourseData* best = nullptr;
  for (const auto& c : corpus) {
    if (c.meta.course_id == target.meta.course_id || c.meta.field != target.meta.field) continue;
    if (!best || c.participants() > best->participants() ||
        (c.participants() == best->participants() && c.meta.course_id < best->meta.course_id))
      best = &c;
  }
  if (!best)
    throw Error(Errc::SpecInvalid, "no other " + std::string(to_string(target.meta.field)) + " course to train " +
                                       target.meta.course_id + " from");
  return best->meta.course_id;
}

}  // namespace

ParadigmSpec make_spec(std::span<const CourseData> corpus, ParadigmKind kind, const std::string& target_course) {
  const CourseData& target = find_course(corpus, target_course);
  ParadigmSpec spec{kind, target_course, {}};
  if (kind == ParadigmKind::SameField) {
    spec.source_courses = {largest_same_field(corpus, target)};
  } else if (kind == ParadigmKind::MultiCourse) {
    for (const auto& id : sorted_ids(corpus))
      if (id != target_course) spec.source_courses.push_back(id);
    if (spec.source_courses.empty()) throw Error(Errc::SpecInvalid, "multi-course training needs another course");
  }
  return spec;
}

void validate_spec(std::span<const CourseData> corpus, const ParadigmSpec& spec) {
  const CourseData& target = find_course(corpus, spec.target_course);
  for (const auto& s : spec.source_courses) find_course(corpus, s);
  switch (spec.kind) {
    case ParadigmKind::SameField:
      if (spec.source_courses.size() != 1 || spec.source_courses.front() != largest_same_field(corpus, target))
        throw Error(Errc::SpecInvalid, "same-field training must use the largest other course of the target's field");
      break;
    case ParadigmKind::MultiCourse: {
      std::vector<std::string> expected;
      for (const auto& id : sorted_ids(corpus))
        if (id != spec.target_course) expected.push_back(id);
      std::vector<std::string> given = spec.source_courses;
      std::sort(given.begin(), given.end());
      if (given != expected || given.empty())
        throw Error(Errc::SpecInvalid, "multi-course training must use every other course");
      break;
    }
    default:
      if (!spec.source_courses.empty())
        throw Error(Errc::SpecInvalid, std::string(to_string(spec.kind)) + " takes no source courses");
  }
}

WeekIndex aligned_source_week(const CourseMeta& source, WeekIndex w) {
  const auto weeks = prediction_weeks(source, ParadigmKind::PostHoc);
  if (weeks.empty()) throw Error(Errc::SpecInvalid, source.course_id + " has no eligible training week");
  return std::max(w, weeks.front());
}

namespace {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> score;
};

Split holdout_split(const FeatureMatrix& x, double fraction, std::uint64_t seed) {
  Split s;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (fraction <= 0.0) {
      s.train.push_back(i);
      s.score.push_back(i);
      continue;
    }
    const double u = static_cast<double>(mix_seed(seed, fnv1a64(x.student_ids[i])) >> 11) * 0x1.0p-53;
    (u < fraction ? s.score : s.train).push_back(i);
  }
  return s;
}

ScoredStudents score_with(const LinearModel& m, const FeatureMatrix& x) { return predict_proba(m, x); }

ScoredStudents score_posthoc(const CourseData& course, WeekIndex w, const RunOptions& opts) {
  const FeatureMatrix raw = build_matrix(course, week_date(course.meta, w));
  const Split split = holdout_split(raw, opts.holdout, opts.seed);
  const FeatureMatrix train_raw = raw.select_rows(split.train);
  NormStats stats = fit_zscore(train_raw);
  LinearModel m = train_logreg(apply_zscore(train_raw, stats), derive_labels(course), opts.reg_c, opts.optimizer);
  const FeatureMatrix scored = apply_zscore(raw.select_rows(split.score), stats);
  m.norm = std::move(stats);
  return score_with(m, scored);
}

// Averaged (or single) source hyperplane applied to the target course,
// z-scored with the target's own statistics at the prediction date.
ScoredStudents score_transfer(const CourseData& target, WeekIndex w, std::span<const LinearModel> sources) {
  const LinearModel averaged = average_hyperplanes(sources);
  const FeatureMatrix raw = build_matrix(target, week_date(target.meta, w));
  return score_with(averaged, apply_zscore(raw, fit_zscore(raw)));
}

ScoredStudents score_baseline1(const CourseData& course, WeekIndex w, const LinearModel& model) {
  const FeatureMatrix raw = build_matrix(course, week_date(course.meta, w));
  return score_with(model, apply_zscore(raw, *model.norm));
}

}  // namespace

LinearModel train_posthoc_model(const CourseData& course, WeekIndex w, const RunOptions& opts) {
  const FeatureMatrix raw = build_matrix(course, week_date(course.meta, w));
  NormStats stats = fit_zscore(raw);
  LinearModel m = train_logreg(apply_zscore(raw, stats), derive_labels(course), opts.reg_c, opts.optimizer);
  m.norm = std::move(stats);
  return m;
}

ScoredStudents score_insitu(const CourseMeta& meta, std::span<const StudentDemographics> students,
                            std::span<const ActivityDay> activity, WeekIndex w, double reg_c, const OptimizerConfig& opt) {
  const ProxyLabelSet proxy = proxy_labels(meta, students, activity, w);
  const ActivityIndex index(meta, students, activity);

  // Train on what was known at the start of week w-1, labelled by whether
  // the student was active during week w-1.
  const FeatureMatrix train_raw = build_matrix(students, index, week_date(meta, WeekIndex{w.value - 1}));
  const FeatureMatrix train = apply_percentile(train_raw, fit_percentile(train_raw));
  LabelSet labels{meta.course_id, proxy.labels};
  LinearModel m = train_logreg(train, labels, reg_c, opt);

  // Each window is ranked against its own population, so features from
  // windows of different lengths are comparable.
  const FeatureMatrix test_raw = build_matrix(students, index, week_date(meta, w));
  NormStats stats = fit_percentile(test_raw);
  const FeatureMatrix test = apply_percentile(test_raw, stats);
  m.norm = std::move(stats);
  return predict_proba(m, test);
}

namespace {

void check_week(const CourseData& target, const ParadigmSpec& spec, WeekIndex w) {
  const auto weeks = prediction_weeks(target.meta, spec.kind);
  if (std::find(weeks.begin(), weeks.end(), w) == weeks.end())
    throw Error(Errc::SpecInvalid, "week " + std::to_string(w.value) + " is not a prediction week of " +
                                       target.meta.course_id + " for " + std::string(to_string(spec.kind)));
}

}  // namespace

ScoredStudents run_paradigm(std::span<const CourseData> corpus, const ParadigmSpec& spec, WeekIndex w,
                            const RunOptions& opts) {
  validate_spec(corpus, spec);
  const CourseData& target = find_course(corpus, spec.target_course);
  check_week(target, spec, w);
  switch (spec.kind) {
    case ParadigmKind::PostHoc: return score_posthoc(target, w, opts);
    case ParadigmKind::SameField:
    case ParadigmKind::MultiCourse: {
      std::vector<LinearModel> models;
      for (const auto& id : spec.source_courses) {
        const CourseData& src = find_course(corpus, id);
        models.push_back(train_posthoc_model(src, aligned_source_week(src.meta, w), opts));
      }
      return score_transfer(target, w, models);
    }
    case ParadigmKind::InSitu:
      return score_insitu(target.meta, target.students, target.activity, w, opts.reg_c, opts.optimizer);
    case ParadigmKind::Baseline1:
      return score_baseline1(target, w, baseline_demographics(target, derive_labels(target), opts.reg_c, opts.optimizer));
    case ParadigmKind::Baseline2: return baseline_recency(target, week_date(target.meta, w));
  }
  throw Error(Errc::SpecInvalid, "unhandled paradigm");
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct Cell {
  ParadigmKind kind;
  std::size_t course;
  WeekIndex week;
};

struct CellResult {
  std::optional<EvalRow> row;
  std::optional<SkippedCell> skipped;
};

}  // namespace

EvalReport run_experiment(std::span<const CourseData> corpus, std::span<const ParadigmKind> kinds,
                          const RunOptions& opts) {
  if (corpus.empty()) throw Error(Errc::EmptyList, "empty corpus");
  if (kinds.empty()) throw Error(Errc::EmptyList, "no paradigms requested");
  {
    std::set<std::string> ids;
    for (const auto& c : corpus)
      if (!ids.insert(c.meta.course_id).second) throw Error(Errc::DuplicateCourseId, c.meta.course_id);
  }

  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return corpus[a].meta.course_id < corpus[b].meta.course_id; });
  auto index_of = [&](const std::string& id) {
    for (std::size_t i = 0; i < corpus.size(); ++i)
      if (corpus[i].meta.course_id == id) return i;
    throw Error(Errc::SpecInvalid, id);
  };

  std::vector<Cell> cells;
  std::map<std::pair<std::size_t, int>, std::size_t> model_slot;  // (course, week) -> slot
  std::vector<std::pair<std::size_t, WeekIndex>> model_keys;
  auto need_model = [&](std::size_t course, WeekIndex w) {
    if (model_slot.emplace(std::pair{course, w.value}, model_keys.size()).second) model_keys.emplace_back(course, w);
  };
  std::map<ParadigmKind, std::map<std::size_t, ParadigmSpec>> specs;
  std::map<std::size_t, std::string> spec_errors;
  for (ParadigmKind kind : kinds) {
    for (std::size_t c : order) {
      const CourseData& course = corpus[c];
      const auto weeks = prediction_weeks(course.meta, kind);
      if (kind == ParadigmKind::SameField || kind == ParadigmKind::MultiCourse) {
        try {
          specs[kind][c] = make_spec(corpus, kind, course.meta.course_id);
        } catch (const Error& e) {
          if (e.code() != Errc::SpecInvalid) throw;
        }
      }
      for (WeekIndex w : weeks) {
        cells.push_back({kind, c, w});
        if (kind == ParadigmKind::SameField || kind == ParadigmKind::MultiCourse) {
          const auto it = specs[kind].find(c);
          if (it == specs[kind].end()) continue;
          for (const auto& src : it->second.source_courses) {
            const std::size_t s = index_of(src);
            need_model(s, aligned_source_week(corpus[s].meta, w));
          }
        }
      }
    }
  }

  // Source models are shared between targets and paradigms, so train each
  // (course, week) model once.
  std::vector<std::optional<LinearModel>> models(model_keys.size());
  std::vector<std::string> model_errors(model_keys.size());
  parallel_for(model_keys.size(), opts.jobs, [&](std::size_t i) {
    const auto& [c, w] = model_keys[i];
    try {
      models[i] = train_posthoc_model(corpus[c], w, opts);
    } catch (const Error& e) {
      if (e.code() != Errc::SingleClass) throw;
      model_errors[i] = e.what();
    }
  });

  std::vector<std::optional<LinearModel>> demographic_models(corpus.size());
  std::vector<std::string> demographic_errors(corpus.size());
  if (std::find(kinds.begin(), kinds.end(), ParadigmKind::Baseline1) != kinds.end()) {
    parallel_for(corpus.size(), opts.jobs, [&](std::size_t c) {
      try {
        demographic_models[c] = baseline_demographics(corpus[c], derive_labels(corpus[c]), opts.reg_c, opts.optimizer);
      } catch (const Error& e) {
        if (e.code() != Errc::SingleClass) throw;
        demographic_errors[c] = e.what();
      }
    });
  }

  std::vector<CellResult> results(cells.size());
  parallel_for(cells.size(), opts.jobs, [&](std::size_t i) {
    const Cell& cell = cells[i];
    const CourseData& course = corpus[cell.course];
    const std::string name(to_string(cell.kind));
    auto skip = [&](std::string reason) {
      results[i].skipped = SkippedCell{name, course.meta.course_id, cell.week.value, std::move(reason)};
    };
    try {
      ScoredStudents scored;
      switch (cell.kind) {
        case ParadigmKind::SameField:
        case ParadigmKind::MultiCourse: {
          const auto& by_course = specs.at(cell.kind);
          const auto it = by_course.find(cell.course);
          if (it == by_course.end()) return skip("no source course available");
          std::vector<LinearModel> sources;
          for (const auto& src : it->second.source_courses) {
            const std::size_t s = index_of(src);
            const std::size_t slot = model_slot.at({s, aligned_source_week(corpus[s].meta, cell.week).value});
            if (!models[slot]) return skip("source " + src + ": " + model_errors[slot]);
            sources.push_back(*models[slot]);
          }
          scored = score_transfer(course, cell.week, sources);
          break;
        }
        case ParadigmKind::Baseline1:
          if (!demographic_models[cell.course]) return skip(demographic_errors[cell.course]);
          scored = score_baseline1(course, cell.week, *demographic_models[cell.course]);
          break;
        case ParadigmKind::PostHoc: scored = score_posthoc(course, cell.week, opts); break;
        case ParadigmKind::InSitu:
          scored = score_insitu(course.meta, course.students, course.activity, cell.week, opts.reg_c, opts.optimizer);
          break;
        case ParadigmKind::Baseline2: scored = baseline_recency(course, week_date(course.meta, cell.week)); break;
      }
      const LabelSet truth = derive_labels(course);
      const std::vector<int> y = [&] {
        std::vector<int> v(scored.student_ids.size(), 0);
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = truth.labels.at(scored.student_ids[k]);
        return v;
      }();
      EvalRow row;
      row.paradigm = name;
      row.course_id = course.meta.course_id;
      row.week = cell.week.value;
      row.auc = auc(scored.scores, y);
      row.accuracy = raw_accuracy(scored.scores, y);
      row.n_students = y.size();
      row.n_positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
      results[i].row = row;
    } catch (const Error& e) {
      if (e.code() != Errc::SingleClass) throw;
      skip(e.what());
    }
  });

  EvalReport report;
  for (auto& r : results) {
    if (r.row) report.rows.push_back(std::move(*r.row));
    if (r.skipped) report.skipped.push_back(std::move(*r.skipped));
  }
  report.aggregates = aggregate_rows(report.rows);
  return report;
}

}  // namespace dropoutlab
