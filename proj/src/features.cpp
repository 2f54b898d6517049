#include "dropoutlab/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "dropoutlab/csv.hpp"
#include "dropoutlab/error.hpp"

namespace dropoutlab {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

FeatureSchema::FeatureSchema() {
  auto add_block = [&](FeatureBlock b, const std::vector<std::string>& names) {
    blocks_.push_back({b, names_.size(), names.size()});
    names_.insert(names_.end(), names.begin(), names.end());
  };
  add_block(FeatureBlock::AgeDummies,
            {"age_lt10", "age_10_15", "age_15_20", "age_20_25", "age_25_30", "age_30_35", "age_35_40",
             "age_40_45", "age_45_50", "age_50_55", "age_55_60", "age_ge60", "age_null"});
  add_block(FeatureBlock::LoeDummies,
            {"loe_elementary", "loe_junior_high", "loe_high_school", "loe_associate", "loe_bachelor",
             "loe_master", "loe_professional", "loe_null"});
  add_block(FeatureBlock::GenderDummies, {"gender_male", "gender_female", "gender_other", "gender_null"});
  add_block(FeatureBlock::ContinentDummies,
            {"continent_europe", "continent_oceania", "continent_africa", "continent_asia",
             "continent_americas", "continent_north_america", "continent_south_america", "continent_null"});
  std::vector<std::string> click;
  for (auto n : kActivityFeatures) click.emplace_back(n);
  add_block(FeatureBlock::Clickstream, click);
  add_block(FeatureBlock::PrecourseSurvey, {"precourse_survey"});
  add_block(FeatureBlock::DaysSinceLastAction, {"days_since_last_action"});

  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& n : names_) h = fnv1a64(n + ",", h);
  hash_ = h;
}

const FeatureSchema& FeatureSchema::standard() {
  static const FeatureSchema schema;
  return schema;
}

const BlockRange& FeatureSchema::block(FeatureBlock b) const {
  for (const auto& r : blocks_)
    if (r.block == b) return r;
  throw Error(Errc::SchemaMismatch, "unknown feature block");
}

std::size_t FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  throw Error(Errc::SchemaMismatch, "no feature named '" + std::string(name) + "'");
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<std::size_t>& rows) const {
  FeatureMatrix out;
  out.schema = schema;
  out.as_of = as_of;
  out.values = Matrix(rows.size(), values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.student_ids.push_back(student_ids[rows[i]]);
    std::copy_n(values.row(rows[i]).begin(), values.cols(), out.values.row(i).begin());
  }
  return out;
}

int encoded_age(int yob) { return 2012 - yob; }

std::size_t age_bin(std::optional<int> yob) {
  if (!yob) return kAgeBins - 1;
  const int age = encoded_age(*yob);
  if (age < 10) return 0;
  if (age >= 60) return 11;
  return static_cast<std::size_t>((age - 10) / 5) + 1;
}

std::array<double, kDemographicWidth> encode_demographics(const StudentDemographics& d) {
  std::array<double, kDemographicWidth> v{};
  std::size_t base = 0;
  v[base + age_bin(d.yob)] = 1.0;
  base += kAgeBins;
  v[base + (d.loe ? static_cast<std::size_t>(*d.loe) : kLoeSlots - 1)] = 1.0;
  base += kLoeSlots;
  v[base + (d.gender ? static_cast<std::size_t>(*d.gender) : kGenderSlots - 1)] = 1.0;
  base += kGenderSlots;
  v[base + (d.continent ? static_cast<std::size_t>(*d.continent) : kContinentSlots - 1)] = 1.0;
  return v;
}

ActivityIndex::ActivityIndex(const CourseData& course)
    : ActivityIndex(course.meta, course.students, course.activity) {}

ActivityIndex::ActivityIndex(const CourseMeta& meta, std::span<const StudentDemographics> students,
                             std::span<const ActivityDay> activity)
    : launch_(meta.launch_date) {
  for (const auto& s : students) ids_.push_back(s.student_id);
  std::sort(ids_.begin(), ids_.end());
  days_.resize(ids_.size());
  for (const auto& a : activity) {
    const auto it = std::lower_bound(ids_.begin(), ids_.end(), a.student_id);
    if (it == ids_.end() || *it != a.student_id)
      throw Error(Errc::UnknownStudent, "activity for unknown student '" + a.student_id + "'");
    days_[static_cast<std::size_t>(it - ids_.begin())].push_back(&a);
  }
  for (auto& d : days_)
    std::stable_sort(d.begin(), d.end(), [](const ActivityDay* a, const ActivityDay* b) { return a->date < b->date; });
}

std::size_t ActivityIndex::locate(const std::string& student_id) const {
  const auto it = std::lower_bound(ids_.begin(), ids_.end(), student_id);
  if (it == ids_.end() || *it != student_id) throw Error(Errc::UnknownStudent, "unknown student '" + student_id + "'");
  return static_cast<std::size_t>(it - ids_.begin());
}

const std::vector<const ActivityDay*>& ActivityIndex::days_of(const std::string& student_id) const {
  return days_[locate(student_id)];
}

std::array<double, kNumActivityFeatures> ActivityIndex::cumulative(const std::string& student_id, Date as_of) const {
  std::array<double, kNumActivityFeatures> sum{};
  for (const ActivityDay* day : days_of(student_id)) {
    if (day->date > as_of) break;
    for (std::size_t k = 0; k < kNumActivityFeatures; ++k) sum[k] += day->counters[k];
  }
  return sum;
}

double ActivityIndex::days_since_last_action(const std::string& student_id, Date as_of) const {
  const auto& days = days_of(student_id);
  for (auto it = days.rbegin(); it != days.rend(); ++it) {
    const ActivityDay* day = *it;
    if (day->date <= as_of && day->nevents() > 0.0) return static_cast<double>(as_of - day->date);
  }
  return static_cast<double>(as_of - launch_ + 1);
}

std::array<double, kNumActivityFeatures> cumulative_clickstream(const CourseData& course, const std::string& student_id,
                                                                Date as_of) {
  return ActivityIndex(course).cumulative(student_id, as_of);
}

double days_since_last_action(const CourseData& course, const std::string& student_id, Date as_of) {
  return ActivityIndex(course).days_since_last_action(student_id, as_of);
}

FeatureMatrix build_matrix(const CourseData& course, Date as_of) {
  return build_matrix(course, ActivityIndex(course), as_of);
}

FeatureMatrix build_matrix(const CourseData& course, const ActivityIndex& index, Date as_of) {
  return build_matrix(course.students, index, as_of);
}

FeatureMatrix build_matrix(std::span<const StudentDemographics> roster, const ActivityIndex& index, Date as_of) {
  const FeatureSchema& schema = FeatureSchema::standard();
  std::vector<const StudentDemographics*> students;
  for (const auto& s : roster) students.push_back(&s);
  std::sort(students.begin(), students.end(), [](auto* a, auto* b) { return a->student_id < b->student_id; });

  FeatureMatrix m;
  m.schema = &schema;
  m.as_of = as_of;
  m.values = Matrix(students.size(), schema.width());
  const std::size_t click = schema.block(FeatureBlock::Clickstream).begin;
  const std::size_t survey = schema.block(FeatureBlock::PrecourseSurvey).begin;
  const std::size_t recency = schema.block(FeatureBlock::DaysSinceLastAction).begin;
  for (std::size_t i = 0; i < students.size(); ++i) {
    const auto& s = *students[i];
    m.student_ids.push_back(s.student_id);
    auto row = m.values.row(i);
    const auto demo = encode_demographics(s);
    std::copy(demo.begin(), demo.end(), row.begin());
    const auto cum = index.cumulative(s.student_id, as_of);
    std::copy(cum.begin(), cum.end(), row.begin() + static_cast<std::ptrdiff_t>(click));
    row[survey] = s.took_precourse_survey ? 1.0 : 0.0;
    row[recency] = index.days_since_last_action(s.student_id, as_of);
  }
  return m;
}

namespace {

void check_schema(const FeatureMatrix& m, const NormStats& stats, NormKind kind) {
  if (stats.kind != kind) throw Error(Errc::SchemaMismatch, "normalization statistics of the wrong kind");
  if (stats.schema_hash != m.schema->hash() || m.values.cols() != m.schema->width())
    throw Error(Errc::SchemaMismatch, "normalization statistics were fit on a different feature schema");
}

}  // namespace

NormStats fit_zscore(const FeatureMatrix& train) {
  if (train.rows() == 0) throw Error(Errc::EmptyMatrix, "cannot fit z-score statistics on zero rows");
  const std::size_t n = train.rows(), d = train.values.cols();
  NormStats s;
  s.kind = NormKind::ZScore;
  s.schema_hash = train.schema->hash();
  s.mean.assign(d, 0.0);
  s.stddev.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += train.values(i, j);
  for (double& v : s.mean) v /= static_cast<double>(n);
  // Two-pass population variance.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = train.values(i, j) - s.mean[j];
      s.stddev[j] += diff * diff;
    }
  for (double& v : s.stddev) v = std::sqrt(v / static_cast<double>(n));
  return s;
}

FeatureMatrix apply_zscore(const FeatureMatrix& m, const NormStats& stats) {
  check_schema(m, stats, NormKind::ZScore);
  FeatureMatrix out = m;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.values.row(i);
    for (std::size_t j = 0; j < row.size(); ++j)
      row[j] = stats.stddev[j] > 0.0 ? (row[j] - stats.mean[j]) / stats.stddev[j] : 0.0;
  }
  return out;
}

std::vector<std::size_t> percentile_columns(const FeatureSchema& schema) {
  std::vector<std::size_t> cols;
  const auto& click = schema.block(FeatureBlock::Clickstream);
  for (std::size_t j = 0; j < click.size; ++j) cols.push_back(click.begin + j);
  cols.push_back(schema.block(FeatureBlock::DaysSinceLastAction).begin);
  return cols;
}

NormStats fit_percentile(const FeatureMatrix& train) {
  if (train.rows() == 0) throw Error(Errc::EmptyMatrix, "cannot fit percentile statistics on zero rows");
  NormStats s;
  s.kind = NormKind::Percentile;
  s.schema_hash = train.schema->hash();
  s.columns = percentile_columns(*train.schema);
  for (std::size_t col : s.columns) {
    std::vector<double> ref(train.rows());
    for (std::size_t i = 0; i < train.rows(); ++i) ref[i] = train.values(i, col);
    std::sort(ref.begin(), ref.end());
    s.reference.push_back(std::move(ref));
  }
  return s;
}

double midrank_percentile(std::span<const double> ref, double value) {
  if (ref.empty()) return 0.5;
  const auto lo = std::lower_bound(ref.begin(), ref.end(), value);
  const auto hi = std::upper_bound(lo, ref.end(), value);
  const double less = static_cast<double>(lo - ref.begin());
  const double equal = static_cast<double>(hi - lo);
  return (less + 0.5 * equal) / static_cast<double>(ref.size());
}

FeatureMatrix apply_percentile(const FeatureMatrix& m, const NormStats& stats) {
  check_schema(m, stats, NormKind::Percentile);
  FeatureMatrix out = m;
  for (std::size_t c = 0; c < stats.columns.size(); ++c) {
    const std::size_t col = stats.columns[c];
    for (std::size_t i = 0; i < out.rows(); ++i) out.values(i, col) = midrank_percentile(stats.reference[c], m.values(i, col));
  }
  return out;
}

void write_matrix_csv(const FeatureMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  csv::Row header = {"student_id"};
  header.insert(header.end(), m.schema->names().begin(), m.schema->names().end());
  csv::write_row(out, header);
  csv::Row row(header.size());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    row[0] = m.student_ids[i];
    for (std::size_t j = 0; j < m.values.cols(); ++j) row[j + 1] = csv::format_number(m.values(i, j));
    csv::write_row(out, row);
  }
}

std::string norm_stats_to_json(const NormStats& s) {
  using nlohmann::json;
  json j;
  j["kind"] = s.kind == NormKind::ZScore ? "zscore" : "percentile";
  j["schema_hash"] = s.schema_hash;
  if (s.kind == NormKind::ZScore) {
    j["mean"] = s.mean;
    j["stddev"] = s.stddev;
  } else {
    j["columns"] = s.columns;
    j["reference"] = s.reference;
  }
  return j.dump();
}

NormStats norm_stats_from_json(const std::string& text) {
  using nlohmann::json;
  try {
    const json j = json::parse(text);
    NormStats s;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "zscore") {
      s.kind = NormKind::ZScore;
      s.mean = j.at("mean").get<std::vector<double>>();
      s.stddev = j.at("stddev").get<std::vector<double>>();
    } else if (kind == "percentile") {
      s.kind = NormKind::Percentile;
      s.columns = j.at("columns").get<std::vector<std::size_t>>();
      s.reference = j.at("reference").get<std::vector<std::vector<double>>>();
    } else {
      throw Error(Errc::ParseError, "unknown normalization kind '" + kind + "'");
    }
    s.schema_hash = j.at("schema_hash").get<std::uint64_t>();
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("normalization statistics: ") + e.what());
  }
}

}  // namespace dropoutlab
