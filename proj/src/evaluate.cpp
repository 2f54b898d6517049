#include "dropoutlab/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "dropoutlab/csv.hpp"
#include "dropoutlab/error.hpp"
#include "dropoutlab/random.hpp"

namespace dropoutlab {

namespace {

// 1-based mid-ranks: tied values share the mean of the ranks they span.
std::vector<double> midranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);  // mean of i+1 .. j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(Errc::SchemaMismatch, "scores and labels differ in length");
  double n_pos = 0.0, n_neg = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw Error(Errc::BadConfig, "score is NaN");
    (labels[i] ? n_pos : n_neg) += 1.0;
  }
  if (n_pos == 0.0 || n_neg == 0.0) throw Error(Errc::SingleClass, "AUC needs both positives and negatives");
  const std::vector<double> ranks = midranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i)
    if (labels[i]) rank_sum += ranks[i];
  const double u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
  return u / (n_pos * n_neg);
}

double auc(const ScoredStudents& scores, const LabelSet& labels) {
  std::vector<int> y(scores.student_ids.size(), 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto it = labels.labels.find(scores.student_ids[i]);
    if (it != labels.labels.end()) y[i] = it->second;
  }
  return auc(scores.scores, y);
}

double sem(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::EmptyList, "standard error of an empty list");
  const double n = static_cast<double>(values.size());
  if (values.size() == 1) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

double raw_accuracy(std::span<const double> scores, std::span<const int> labels, double threshold) {
  if (scores.size() != labels.size()) throw Error(Errc::SchemaMismatch, "scores and labels differ in length");
  if (scores.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if ((scores[i] >= threshold ? 1 : 0) == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(Errc::SchemaMismatch, "spearman inputs differ in length");
  if (x.size() < 2) return 0.0;
  const auto rx = midranks(x), ry = midranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

bool label_permutation_invariance_check(std::span<const double> scores, std::span<const int> labels, int trials,
                                        std::uint64_t seed) {
  const double reference = auc(scores, labels);
  std::vector<double> s(scores.begin(), scores.end());
  std::vector<int> y(labels.begin(), labels.end());
  Rng rng(seed);
  for (int t = 0; t < trials; ++t) {
    for (std::size_t i = s.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_index(i));
      std::swap(s[i - 1], s[j]);
      std::swap(y[i - 1], y[j]);
    }
    if (auc(s, y) != reference) return false;
  }
  return true;
}

std::vector<EvalAggregate> aggregate_rows(const std::vector<EvalRow>& rows) {
  std::vector<std::string> paradigms;
  std::map<std::pair<std::string, int>, std::vector<double>> groups;
  for (const auto& r : rows) {
    if (std::find(paradigms.begin(), paradigms.end(), r.paradigm) == paradigms.end()) paradigms.push_back(r.paradigm);
    groups[{r.paradigm, r.week}].push_back(r.auc);
  }
  std::vector<EvalAggregate> out;
  for (const auto& p : paradigms) {
    for (const auto& [key, values] : groups) {
      if (key.first != p) continue;
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      out.push_back({p, key.second, mean, sem(values), values.size()});
    }
  }
  return out;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  return out;
}

}  // namespace

std::string summary_table(const EvalReport& report) {
  std::vector<std::string> paradigms;
  std::set<int> weeks;
  std::map<std::pair<std::string, int>, const EvalAggregate*> cell;
  for (const auto& a : report.aggregates) {
    if (std::find(paradigms.begin(), paradigms.end(), a.paradigm) == paradigms.end()) paradigms.push_back(a.paradigm);
    weeks.insert(a.week);
    cell[{a.paradigm, a.week}] = &a;
  }

  std::ostringstream out;
  char buf[64];
  out << "Mean AUC by week (standard error in parentheses)\n\n";
  std::snprintf(buf, sizeof buf, "%-12s", "paradigm");
  out << buf;
  for (int w : weeks) {
    std::snprintf(buf, sizeof buf, " %16s", ("week " + std::to_string(w)).c_str());
    out << buf;
  }
  out << " " << "  mean\n";
  for (const auto& p : paradigms) {
    std::snprintf(buf, sizeof buf, "%-12s", p.c_str());
    out << buf;
    double total = 0.0;
    int count = 0;
    for (int w : weeks) {
      const auto it = cell.find({p, w});
      if (it == cell.end()) {
        std::snprintf(buf, sizeof buf, " %16s", "-");
      } else {
        std::snprintf(buf, sizeof buf, " %7.4f (%6.4f)", it->second->mean_auc, it->second->sem);
        total += it->second->mean_auc;
        ++count;
      }
      out << buf;
    }
    std::snprintf(buf, sizeof buf, " %7.4f\n", count ? total / count : 0.0);
    out << buf;
  }
  out << "\nrows: " << report.rows.size() << ", skipped cells: " << report.skipped.size() << "\n";
  for (const auto& s : report.skipped)
    out << "  skipped " << s.paradigm << " " << s.course_id << " week " << s.week << ": " << s.reason << "\n";
  return out.str();
}

void emit_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
  {
    auto out = open_out(dir / "rows.csv");
    csv::write_row(out, {"paradigm", "course_id", "week", "auc", "n_students", "n_positives"});
    for (const auto& r : report.rows)
      csv::write_row(out, {r.paradigm, r.course_id, std::to_string(r.week), csv::format_number(r.auc),
                           std::to_string(r.n_students), std::to_string(r.n_positives)});
  }
  {
    auto out = open_out(dir / "aggregate.csv");
    csv::write_row(out, {"paradigm", "week", "mean_auc", "sem", "n_courses"});
    for (const auto& a : report.aggregates)
      csv::write_row(out, {a.paradigm, std::to_string(a.week), csv::format_number(a.mean_auc),
                           csv::format_number(a.sem), std::to_string(a.n_courses)});
  }
  {
    auto out = open_out(dir / "summary.txt");
    out << summary_table(report);
  }
}

std::vector<EvalRow> read_rows_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_file(path);
  const std::string src = path.filename().string();
  const std::size_t c_p = t.column("paradigm", src), c_c = t.column("course_id", src), c_w = t.column("week", src),
                    c_a = t.column("auc", src), c_n = t.column("n_students", src),
                    c_pos = t.column("n_positives", src);
  std::vector<EvalRow> rows;
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    const auto& r = t.records[i];
    if (r.size() < t.header.size())
      throw Error(Errc::ParseError, src + " row " + std::to_string(i + 2) + ": too few cells");
    EvalRow row;
    row.paradigm = r[c_p];
    row.course_id = r[c_c];
    double week = 0.0, n = 0.0, pos = 0.0;
    if (!csv::parse_number(r[c_w], week) || !csv::parse_number(r[c_a], row.auc) || !csv::parse_number(r[c_n], n) ||
        !csv::parse_number(r[c_pos], pos))
      throw Error(Errc::ParseError, src + " row " + std::to_string(i + 2) + ": bad number");
    row.week = static_cast<int>(week);
    row.n_students = static_cast<std::size_t>(n);
    row.n_positives = static_cast<std::size_t>(pos);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace dropoutlab
