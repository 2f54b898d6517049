#include "dropoutlab/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "dropoutlab/csv.hpp"
#include "dropoutlab/error.hpp"
#include "dropoutlab/random.hpp"

namespace dropoutlab {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

template <typename Enum, std::size_t N>
std::optional<Enum> parse_enum(std::string_view text, const std::array<Enum, N>& all) {
  const std::string key = lower(text);
  for (Enum v : all)
    if (lower(to_string(v)) == key) return v;
  return std::nullopt;
}

}  // namespace

std::string_view to_string(Field f) {
  switch (f) {
    case Field::SocialSci: return "SocialSci";
    case Field::Hum: return "Hum";
    case Field::STEM: return "STEM";
    case Field::HealthSci: return "HealthSci";
  }
  return "";
}

std::string_view to_string(Loe v) {
  switch (v) {
    case Loe::Elementary: return "Elementary";
    case Loe::JuniorHigh: return "JuniorHigh";
    case Loe::HighSchool: return "HighSchool";
    case Loe::Associate: return "Associate";
    case Loe::Bachelor: return "Bachelor";
    case Loe::Master: return "Master";
    case Loe::Professional: return "Professional";
  }
  return "";
}

std::string_view to_string(Gender v) {
  switch (v) {
    case Gender::Male: return "Male";
    case Gender::Female: return "Female";
    case Gender::Other: return "Other";
  }
  return "";
}

std::string_view to_string(Continent v) {
  switch (v) {
    case Continent::Europe: return "Europe";
    case Continent::Oceania: return "Oceania";
    case Continent::Africa: return "Africa";
    case Continent::Asia: return "Asia";
    case Continent::Americas: return "Americas";
    case Continent::NorthAmerica: return "NorthAmerica";
    case Continent::SouthAmerica: return "SouthAmerica";
  }
  return "";
}

std::optional<Field> parse_field(std::string_view text) { return parse_enum(text, kAllFields); }

std::optional<Loe> parse_loe(std::string_view text) {
  // edX person_course codes are accepted alongside the enum names.
  static const std::unordered_map<std::string, Loe> codes = {
      {"el", Loe::Elementary}, {"jhs", Loe::JuniorHigh}, {"hs", Loe::HighSchool},
      {"a", Loe::Associate},   {"b", Loe::Bachelor},     {"m", Loe::Master},
      {"p", Loe::Professional}};
  if (auto it = codes.find(lower(text)); it != codes.end()) return it->second;
  return parse_enum(text, kAllLoe);
}

std::optional<Gender> parse_gender(std::string_view text) {
  const std::string key = lower(text);
  if (key == "m") return Gender::Male;
  if (key == "f") return Gender::Female;
  if (key == "o") return Gender::Other;
  return parse_enum(text, kAllGenders);
}

std::optional<Continent> parse_continent(std::string_view text) {
  std::string key;
  for (char c : lower(text))
    if (c != ' ' && c != '_') key.push_back(c);
  for (Continent v : kAllContinents)
    if (lower(to_string(v)) == key) return v;
  return std::nullopt;
}

void CourseMeta::validate() const {
  if (course_id.empty()) throw Error(Errc::BadConfig, "empty course_id");
  if (!(launch_date < t100_date && t100_date <= end_date))
    throw Error(Errc::BadDate, course_id + ": require launch_date < t100_date <= end_date (got " +
                                   launch_date.iso() + ", " + t100_date.iso() + ", " + end_date.iso() + ")");
  if (!(cert_threshold > 0.0 && cert_threshold <= 1.0))
    throw Error(Errc::BadConfig, course_id + ": cert_threshold must lie in (0, 1]");
}

void CourseData::validate() const {
  meta.validate();
  std::set<std::string> ids;
  for (const auto& s : students)
    if (!ids.insert(s.student_id).second)
      throw Error(Errc::ParseError, "duplicate student '" + s.student_id + "'");
  std::set<std::pair<std::string, std::int64_t>> seen;
  for (const auto& a : activity) {
    if (!ids.count(a.student_id)) throw Error(Errc::UnknownStudent, "activity for unknown student '" + a.student_id + "'");
    if (a.date < meta.launch_date || a.date > meta.end_date)
      throw Error(Errc::BadDate, "activity date " + a.date.iso() + " outside the course window");
    for (std::size_t k = 0; k < kNumActivityFeatures; ++k)
      if (!(a.counters[k] >= 0.0) || !std::isfinite(a.counters[k]))
        throw Error(Errc::NegativeCounter, a.student_id + " " + a.date.iso() + ": " +
                                               std::string(kActivityFeatures[k]) + " must be >= 0");
    if (!seen.emplace(a.student_id, a.date.days()).second)
      throw Error(Errc::DuplicateStudentDay, a.student_id + " " + a.date.iso());
  }
  for (const auto& [id, g] : final_grade) {
    if (!ids.count(id)) throw Error(Errc::UnknownStudent, "grade for unknown student '" + id + "'");
    if (!(g >= 0.0 && g <= 1.0)) throw Error(Errc::ParseError, "grade of '" + id + "' outside [0, 1]");
  }
}

CoursePaths CoursePaths::in_directory(const std::filesystem::path& dir) {
  return {dir / "course_meta.csv", dir / "demographics.csv", dir / "activity.csv", dir / "grades.csv"};
}

namespace {

std::string where(const std::filesystem::path& file, std::size_t record, std::string_view column) {
  // +2: one for the header, one for 1-based numbering.
  return file.filename().string() + " row " + std::to_string(record + 2) + ", column '" +
         std::string(column) + "'";
}

double parse_required_number(const std::string& cell, const std::filesystem::path& file, std::size_t record,
                             std::string_view column) {
  double v = 0.0;
  if (!csv::parse_number(cell, v) || !std::isfinite(v))
    throw Error(Errc::ParseError, where(file, record, column) + ": not a number '" + cell + "'");
  return v;
}

Date parse_date_cell(const std::string& cell, const std::filesystem::path& file, std::size_t record,
                     std::string_view column) {
  try {
    return Date::parse(cell);
  } catch (const Error&) {
    throw Error(Errc::BadDate, where(file, record, column) + ": bad date '" + cell + "'");
  }
}

const std::string& cell_at(const csv::Row& row, std::size_t col, const std::filesystem::path& file,
                           std::size_t record) {
  if (col >= row.size())
    throw Error(Errc::MissingColumn, file.filename().string() + " row " + std::to_string(record + 2) +
                                         ": too few cells");
  return row[col];
}

std::optional<int> parse_yob(std::string_view cell) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
    // Some exports write years as "1990.0".
    double d = 0.0;
    if (csv::parse_number(cell, d) && std::isfinite(d) && d == std::floor(d)) return static_cast<int>(d);
    return std::nullopt;
  }
  return v;
}

}  // namespace

CourseData load_course(const std::filesystem::path& meta_path, const std::filesystem::path& demographics_path,
                       const std::filesystem::path& activity_path, const std::filesystem::path& grades_path) {
  CourseData course;

  {
    const csv::Table t = csv::read_file(meta_path);
    const std::string src = meta_path.filename().string();
    const std::size_t c_id = t.column("course_id", src), c_launch = t.column("launch_date", src),
                      c_end = t.column("end_date", src), c_t100 = t.column("t100_date", src),
                      c_thr = t.column("cert_threshold", src), c_field = t.column("field", src);
    if (t.records.empty()) throw Error(Errc::ParseError, src + ": no course row");
    const auto& r = t.records.front();
    auto& m = course.meta;
    m.course_id = cell_at(r, c_id, meta_path, 0);
    m.launch_date = parse_date_cell(cell_at(r, c_launch, meta_path, 0), meta_path, 0, "launch_date");
    m.end_date = parse_date_cell(cell_at(r, c_end, meta_path, 0), meta_path, 0, "end_date");
    m.t100_date = parse_date_cell(cell_at(r, c_t100, meta_path, 0), meta_path, 0, "t100_date");
    m.cert_threshold = parse_required_number(cell_at(r, c_thr, meta_path, 0), meta_path, 0, "cert_threshold");
    const auto field = parse_field(cell_at(r, c_field, meta_path, 0));
    if (!field) throw Error(Errc::ParseError, where(meta_path, 0, "field") + ": unknown field");
    m.field = *field;
    m.validate();
  }

  std::set<std::string> ids;
  {
    const csv::Table t = csv::read_file(demographics_path);
    const std::string src = demographics_path.filename().string();
    const std::size_t c_id = t.column("student_id", src), c_yob = t.column("yob", src),
                      c_loe = t.column("loe", src), c_gender = t.column("gender", src),
                      c_cont = t.column("continent", src), c_survey = t.column("precourse_survey", src);
    for (std::size_t i = 0; i < t.records.size(); ++i) {
      const auto& r = t.records[i];
      StudentDemographics d;
      d.student_id = cell_at(r, c_id, demographics_path, i);
      if (d.student_id.empty()) throw Error(Errc::ParseError, where(demographics_path, i, "student_id") + ": empty id");
      d.yob = parse_yob(cell_at(r, c_yob, demographics_path, i));
      d.loe = parse_loe(cell_at(r, c_loe, demographics_path, i));
      d.gender = parse_gender(cell_at(r, c_gender, demographics_path, i));
      d.continent = parse_continent(cell_at(r, c_cont, demographics_path, i));
      const std::string& survey = cell_at(r, c_survey, demographics_path, i);
      if (survey == "1" || lower(survey) == "true") {
        d.took_precourse_survey = true;
      } else if (survey.empty() || survey == "0" || lower(survey) == "false") {
        d.took_precourse_survey = false;
      } else {
        throw Error(Errc::ParseError, where(demographics_path, i, "precourse_survey") + ": expected 0 or 1");
      }
      if (!ids.insert(d.student_id).second)
        throw Error(Errc::ParseError, where(demographics_path, i, "student_id") + ": duplicate student");
      course.students.push_back(std::move(d));
    }
  }

  {
    const csv::Table t = csv::read_file(activity_path);
    const std::string src = activity_path.filename().string();
    const std::size_t c_id = t.column("student_id", src), c_date = t.column("date", src);
    std::array<std::size_t, kNumActivityFeatures> cols{};
    for (std::size_t k = 0; k < kNumActivityFeatures; ++k) cols[k] = t.column(kActivityFeatures[k], src);
    std::set<std::pair<std::string, std::int64_t>> seen;
    course.activity.reserve(t.records.size());
    for (std::size_t i = 0; i < t.records.size(); ++i) {
      const auto& r = t.records[i];
      ActivityDay a;
      a.student_id = cell_at(r, c_id, activity_path, i);
      if (!ids.count(a.student_id))
        throw Error(Errc::UnknownStudent, where(activity_path, i, "student_id") + ": unknown student '" +
                                              a.student_id + "'");
      a.date = parse_date_cell(cell_at(r, c_date, activity_path, i), activity_path, i, "date");
      if (a.date < course.meta.launch_date || a.date > course.meta.end_date)
        throw Error(Errc::BadDate, where(activity_path, i, "date") + ": " + a.date.iso() +
                                       " outside the course window");
      for (std::size_t k = 0; k < kNumActivityFeatures; ++k) {
        const double v = parse_required_number(cell_at(r, cols[k], activity_path, i), activity_path, i,
                                               kActivityFeatures[k]);
        if (v < 0.0)
          throw Error(Errc::NegativeCounter, where(activity_path, i, kActivityFeatures[k]) + ": negative value " +
                                                 r[cols[k]]);
        a.counters[k] = v;
      }
      if (!seen.emplace(a.student_id, a.date.days()).second)
        throw Error(Errc::DuplicateStudentDay, where(activity_path, i, "date") + ": second record for " +
                                                   a.student_id + " on " + a.date.iso());
      course.activity.push_back(std::move(a));
    }
  }

  {
    const csv::Table t = csv::read_file(grades_path);
    const std::string src = grades_path.filename().string();
    const std::size_t c_id = t.column("student_id", src), c_grade = t.column("final_grade", src);
    for (std::size_t i = 0; i < t.records.size(); ++i) {
      const auto& r = t.records[i];
      const std::string& id = cell_at(r, c_id, grades_path, i);
      if (!ids.count(id))
        throw Error(Errc::UnknownStudent, where(grades_path, i, "student_id") + ": unknown student '" + id + "'");
      const double g = parse_required_number(cell_at(r, c_grade, grades_path, i), grades_path, i, "final_grade");
      if (g < 0.0 || g > 1.0) throw Error(Errc::ParseError, where(grades_path, i, "final_grade") + ": outside [0, 1]");
      course.final_grade[id] = g;
    }
  }

  std::sort(course.students.begin(), course.students.end(),
            [](const auto& a, const auto& b) { return a.student_id < b.student_id; });
  std::sort(course.activity.begin(), course.activity.end(), [](const auto& a, const auto& b) {
    return std::tie(a.student_id, a.date) < std::tie(b.student_id, b.date);
  });
  return course;
}

CourseData load_course(const CoursePaths& paths) {
  return load_course(paths.meta, paths.demographics, paths.activity, paths.grades);
}

CourseData load_course_dir(const std::filesystem::path& dir) { return load_course(CoursePaths::in_directory(dir)); }

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  return out;
}

template <typename T>
std::string opt_name(const std::optional<T>& v) {
  return v ? std::string(to_string(*v)) : std::string();
}

}  // namespace

void write_course(const CourseData& course, const CoursePaths& paths) {
  {
    auto out = open_out(paths.meta);
    csv::write_row(out, {"course_id", "launch_date", "end_date", "t100_date", "cert_threshold", "field"});
    const auto& m = course.meta;
    csv::write_row(out, {m.course_id, m.launch_date.iso(), m.end_date.iso(), m.t100_date.iso(),
                         csv::format_number(m.cert_threshold), std::string(to_string(m.field))});
  }
  {
    std::vector<const StudentDemographics*> sorted;
    for (const auto& s : course.students) sorted.push_back(&s);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->student_id < b->student_id; });
    auto out = open_out(paths.demographics);
    csv::write_row(out, {"student_id", "yob", "loe", "gender", "continent", "precourse_survey"});
    for (const auto* s : sorted)
      csv::write_row(out, {s->student_id, s->yob ? std::to_string(*s->yob) : std::string(), opt_name(s->loe),
                           opt_name(s->gender), opt_name(s->continent), s->took_precourse_survey ? "1" : "0"});
  }
  {
    std::vector<const ActivityDay*> sorted;
    for (const auto& a : course.activity) sorted.push_back(&a);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) {
      return std::tie(a->student_id, a->date) < std::tie(b->student_id, b->date);
    });
    auto out = open_out(paths.activity);
    csv::Row header = {"student_id", "date"};
    for (auto name : kActivityFeatures) header.emplace_back(name);
    csv::write_row(out, header);
    csv::Row row(2 + kNumActivityFeatures);
    for (const auto* a : sorted) {
      row[0] = a->student_id;
      row[1] = a->date.iso();
      for (std::size_t k = 0; k < kNumActivityFeatures; ++k) row[2 + k] = csv::format_number(a->counters[k]);
      csv::write_row(out, row);
    }
  }
  {
    auto out = open_out(paths.grades);
    csv::write_row(out, {"student_id", "final_grade"});
    for (const auto& [id, g] : course.final_grade) csv::write_row(out, {id, csv::format_number(g)});
  }
}

void write_course_dir(const CourseData& course, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
  write_course(course, CoursePaths::in_directory(dir));
}

LabelSet derive_labels(const CourseData& course) {
  LabelSet out;
  out.course_id = course.meta.course_id;
  for (const auto& s : course.students) {
    const auto it = course.final_grade.find(s.student_id);
    const double grade = it == course.final_grade.end() ? 0.0 : it->second;
    out.labels[s.student_id] = grade >= course.meta.cert_threshold ? 1 : 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator

void SynthConfig::validate() const {
  auto bad = [&](const std::string& what) { return Error(Errc::BadConfig, course_id + ": " + what); };
  if (course_id.empty()) throw Error(Errc::BadConfig, "empty course_id");
  if (n_students < 0) throw bad("n_students must be >= 0");
  if (weeks_to_t100 < 1) throw bad("weeks_to_t100 must be >= 1");
  if (weeks_after_t100 < 0) throw bad("weeks_after_t100 must be >= 0");
  if (!(engagement_alpha > 0.0)) throw bad("engagement_alpha must be > 0");
  if (!(engagement_beta >= 0.0)) throw bad("engagement_beta must be >= 0");
  if (!(decay_mean >= 0.0 && decay_mean < 1.0)) throw bad("decay_mean must lie in [0, 1)");
  if (!(quit_hazard >= 0.0 && quit_hazard <= 1.0)) throw bad("quit_hazard must lie in [0, 1]");
  if (!std::isfinite(demographic_effect)) throw bad("demographic_effect must be finite");
  if (!(grade_scale > 0.0)) throw bad("grade_scale must be > 0");
  if (!(skill_alpha > 0.0) || skill_beta < 0.0) throw bad("skill_alpha must be > 0 and skill_beta >= 0");
  if (!(cert_threshold > 0.0 && cert_threshold <= 1.0)) throw bad("cert_threshold must lie in (0, 1]");
}

SynthConfig default_synth_config() { return SynthConfig{}; }

CorpusConfig default_corpus_config() {
  struct Row {
    const char* id;
    Field field;
    int weeks;
    int after;
    std::int64_t n;
    double alpha, beta, decay, threshold;
  };
  // Loosely spans the participant counts, course lengths and certification
  // rates seen in HarvardX courses.
  static constexpr Row rows[] = {
      {"SOC101", Field::SocialSci, 8, 2, 3000, 1.2, 2.0, 0.020, 0.70},
      {"SOC202", Field::SocialSci, 6, 2, 2200, 1.0, 2.2, 0.025, 0.60},
      {"HUM101", Field::Hum, 9, 3, 2600, 1.3, 1.9, 0.018, 0.70},
      {"HUM210", Field::Hum, 7, 2, 2000, 1.1, 2.1, 0.022, 0.75},
      {"STEM101", Field::STEM, 10, 2, 2800, 1.0, 2.4, 0.020, 0.70},
      {"STEM250", Field::STEM, 8, 3, 2100, 1.2, 2.0, 0.024, 0.80},
      {"HLTH101", Field::HealthSci, 8, 2, 2400, 1.3, 2.0, 0.020, 0.65},
      {"HLTH150", Field::HealthSci, 7, 2, 2000, 1.1, 2.2, 0.022, 0.70},
  };
  CorpusConfig config;
  int offset = 0;
  for (const auto& r : rows) {
    SynthConfig c;
    c.course_id = r.id;
    c.field = r.field;
    c.launch_date = Date::from_ymd(2014, 1, 6) + 14 * offset++;
    c.weeks_to_t100 = r.weeks;
    c.weeks_after_t100 = r.after;
    c.n_students = r.n;
    c.engagement_alpha = r.alpha;
    c.engagement_beta = r.beta;
    c.decay_mean = r.decay;
    c.cert_threshold = r.threshold;
    config.courses.push_back(c);
  }
  return config;
}

namespace {

using nlohmann::json;

SynthConfig synth_from_json(const json& j) {
  SynthConfig c;
  if (!j.is_object()) throw Error(Errc::BadConfig, "course entry must be an object");
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::remove_reference_t<decltype(dst)>>();
  };
  get("course_id", c.course_id);
  if (j.contains("field")) {
    const auto f = parse_field(j.at("field").get<std::string>());
    if (!f) throw Error(Errc::BadConfig, "unknown field '" + j.at("field").get<std::string>() + "'");
    c.field = *f;
  }
  if (j.contains("launch_date")) {
    try {
      c.launch_date = Date::parse(j.at("launch_date").get<std::string>());
    } catch (const Error& e) {
      throw Error(Errc::BadConfig, e.what());
    }
  }
  get("weeks_to_t100", c.weeks_to_t100);
  get("weeks_after_t100", c.weeks_after_t100);
  get("n_students", c.n_students);
  get("engagement_alpha", c.engagement_alpha);
  get("engagement_beta", c.engagement_beta);
  get("decay_mean", c.decay_mean);
  get("quit_hazard", c.quit_hazard);
  get("demographic_effect", c.demographic_effect);
  get("grade_scale", c.grade_scale);
  get("skill_alpha", c.skill_alpha);
  get("skill_beta", c.skill_beta);
  get("cert_threshold", c.cert_threshold);
  return c;
}

}  // namespace

CorpusConfig load_corpus_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::BadConfig, "cannot read corpus config " + path.string());
  CorpusConfig config;
  try {
    const json doc = json::parse(in);
    const json& courses = doc.is_array() ? doc : doc.at("courses");
    for (const auto& entry : courses) config.courses.push_back(synth_from_json(entry));
  } catch (const json::exception& e) {
    throw Error(Errc::BadConfig, path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(Errc::BadConfig, path.string() + ": " + e.what());
  }
  return config;
}

std::string corpus_config_to_json(const CorpusConfig& config) {
  json courses = json::array();
  for (const auto& c : config.courses) {
    courses.push_back({{"course_id", c.course_id},
                       {"field", std::string(to_string(c.field))},
                       {"launch_date", c.launch_date.iso()},
                       {"weeks_to_t100", c.weeks_to_t100},
                       {"weeks_after_t100", c.weeks_after_t100},
                       {"n_students", c.n_students},
                       {"engagement_alpha", c.engagement_alpha},
                       {"engagement_beta", c.engagement_beta},
                       {"decay_mean", c.decay_mean},
                       {"quit_hazard", c.quit_hazard},
                       {"demographic_effect", c.demographic_effect},
                       {"grade_scale", c.grade_scale},
                       {"skill_alpha", c.skill_alpha},
                       {"skill_beta", c.skill_beta},
                       {"cert_threshold", c.cert_threshold}});
  }
  return json{{"courses", courses}}.dump(2) + "\n";
}

namespace {

// Mean daily count of each counter for a fully engaged student at unit
// intensity. Time counters (avg/sdv/max/n/sum_dt) and nevents are drawn
// separately.
constexpr std::array<double, kNumActivityFeatures> kDailyRates = [] {
  std::array<double, kNumActivityFeatures> r{};
  r[activity_index("nprogcheck")] = 0.4;
  r[activity_index("nshow_answer")] = 0.8;
  r[activity_index("nvideo")] = 5.0;
  r[activity_index("nproblem_check")] = 3.0;
  r[activity_index("nforum")] = 0.8;
  r[activity_index("ntranscript")] = 0.4;
  r[activity_index("nseq_goto")] = 2.5;
  r[activity_index("nseek_video")] = 1.5;
  r[activity_index("npause_video")] = 2.5;
  r[activity_index("nvideos_viewed")] = 1.8;
  r[activity_index("nvideos_watched_sec")] = 420.0;
  r[activity_index("nforum_reads")] = 1.5;
  r[activity_index("nforum_posts")] = 0.15;
  r[activity_index("nforum_threads")] = 0.04;
  r[activity_index("nproblems_answered")] = 2.5;
  r[activity_index("nproblems_attempted")] = 3.0;
  r[activity_index("nproblems_multiplechoice")] = 1.2;
  r[activity_index("nproblems_choice")] = 0.8;
  r[activity_index("problems_numerical")] = 0.4;
  r[activity_index("nproblems_option")] = 0.25;
  r[activity_index("problems_custom")] = 0.15;
  r[activity_index("nproblems_string")] = 0.15;
  r[activity_index("problems_mixed")] = 0.08;
  r[activity_index("nproblems_formula")] = 0.08;
  r[activity_index("problems_other")] = 0.04;
  return r;
}();
constexpr double kEventsRate = 35.0;
constexpr double kSessionsRate = 1.5;
constexpr double kSessionSeconds = 240.0;

double round_to(double v, double scale) { return std::round(v * scale) / scale; }

template <typename T, std::size_t N>
std::optional<T> pick(Rng& rng, const std::array<T, N>& values, const std::array<double, N>& weights,
                      double null_prob) {
  if (rng.bernoulli(null_prob)) return std::nullopt;
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < N; ++i) {
    if (u < weights[i]) return values[i];
    u -= weights[i];
  }
  return values[N - 1];
}

double loe_effect(const std::optional<Loe>& loe) {
  if (!loe) return -0.2;
  switch (*loe) {
    case Loe::Elementary: return -0.6;
    case Loe::JuniorHigh: return -0.4;
    case Loe::HighSchool: return -0.2;
    case Loe::Associate: return 0.0;
    case Loe::Bachelor: return 0.2;
    case Loe::Master:
    case Loe::Professional: return 0.4;
  }
  return 0.0;
}

double age_effect(const std::optional<int>& yob) {
  if (!yob) return 0.0;
  const int age = 2012 - *yob;
  if (age < 20) return -0.3;
  if (age >= 25 && age < 60) return 0.2;
  return 0.0;
}

double continent_effect(const std::optional<Continent>& c) {
  if (!c) return 0.0;
  switch (*c) {
    case Continent::Europe:
    case Continent::NorthAmerica:
    case Continent::Oceania: return 0.1;
    case Continent::Africa:
    case Continent::Asia: return -0.1;
    default: return 0.0;
  }
}

StudentDemographics draw_demographics(Rng& rng, std::string id) {
  StudentDemographics d;
  d.student_id = std::move(id);
  if (!rng.bernoulli(0.1)) {
    const double age = 14.0 + 8.0 * rng.gamma(2.0);
    d.yob = 2012 - static_cast<int>(std::min(age, 85.0));
  }
  d.loe = pick(rng, kAllLoe, std::array<double, 7>{0.02, 0.04, 0.22, 0.07, 0.35, 0.24, 0.06}, 0.1);
  d.gender = pick(rng, kAllGenders, std::array<double, 3>{0.6, 0.38, 0.02}, 0.05);
  d.continent =
      pick(rng, kAllContinents, std::array<double, 7>{0.25, 0.03, 0.07, 0.3, 0.05, 0.25, 0.05}, 0.1);
  return d;
}

ActivityDay draw_day(Rng& rng, const std::string& id, Date date, double engagement) {
  ActivityDay day;
  day.student_id = id;
  day.date = date;
  const double intensity = (0.4 + 0.6 * engagement) * rng.gamma(4.0) / 4.0;

  const auto sessions = 1 + rng.poisson(kSessionsRate * intensity);
  double sum = 0.0, sum_sq = 0.0, max = 0.0;
  for (std::uint64_t s = 0; s < sessions; ++s) {
    const double len = round_to(kSessionSeconds * (0.5 + intensity) * rng.gamma(2.0) / 2.0, 10.0);
    sum += len;
    sum_sq += len * len;
    max = std::max(max, len);
  }
  const double n = static_cast<double>(sessions);
  const double mean = sum / n;
  day.counters[activity_index("avg_dt")] = round_to(mean, 10.0);
  day.counters[activity_index("sdv_dt")] = round_to(std::sqrt(std::max(0.0, sum_sq / n - mean * mean)), 10.0);
  day.counters[activity_index("max_dt")] = max;
  day.counters[activity_index("n_dt")] = n;
  day.counters[activity_index("sum_dt")] = round_to(sum, 10.0);
  day.counters[kNevents] = 1.0 + static_cast<double>(rng.poisson(kEventsRate * intensity));
  for (std::size_t k = 0; k < kNumActivityFeatures; ++k)
    if (kDailyRates[k] > 0.0) day.counters[k] = static_cast<double>(rng.poisson(kDailyRates[k] * intensity));
  return day;
}

}  // namespace

CourseData synthesize_course(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  CourseData course;
  auto& meta = course.meta;
  meta.course_id = config.course_id;
  meta.field = config.field;
  meta.launch_date = config.launch_date;
  meta.t100_date = config.launch_date + 7 * config.weeks_to_t100;
  meta.end_date = meta.t100_date + 7 * config.weeks_after_t100;
  meta.cert_threshold = config.cert_threshold;
  meta.validate();

  const std::int64_t n_days = meta.end_date - meta.launch_date + 1;
  // Problems a fully engaged student answers by the end date, on average.
  const double full_answered = kDailyRates[kProblemsAnswered] * static_cast<double>(n_days);

  const int digits = std::max<int>(5, static_cast<int>(std::to_string(config.n_students).size()));
  for (std::int64_t i = 0; i < config.n_students; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    std::string idx = std::to_string(i);
    std::string id = config.course_id + "_s" + std::string(digits - idx.size(), '0') + idx;

    StudentDemographics d = draw_demographics(rng, id);
    const double demo_score =
        config.demographic_effect * (loe_effect(d.loe) + age_effect(d.yob) + continent_effect(d.continent));

    double e0 = config.engagement_beta > 0.0 ? rng.beta(config.engagement_alpha, config.engagement_beta) : 1.0;
    if (e0 > 0.0 && e0 < 1.0) {
      const double logit = std::log(e0 / (1.0 - e0)) + demo_score;
      e0 = 1.0 / (1.0 + std::exp(-logit));
    }
    d.took_precourse_survey = rng.bernoulli(0.15 + 0.45 * e0);

    const double skill = config.skill_beta > 0.0 ? rng.beta(config.skill_alpha, config.skill_beta) : 1.0;
    const double decay = config.decay_mean * rng.gamma(2.0) / 2.0;
    double engagement = e0;
    bool quit = false;
    double answered = 0.0;
    for (std::int64_t t = 0; t < n_days; ++t) {
      if (!quit && rng.bernoulli(config.quit_hazard * (1.0 - engagement))) quit = true;
      if (quit) break;
      if (rng.bernoulli(engagement)) {
        ActivityDay day = draw_day(rng, id, meta.launch_date + t, engagement);
        answered += day.counters[kProblemsAnswered];
        course.activity.push_back(std::move(day));
      }
      engagement *= 1.0 - std::min(decay, 1.0);
    }

    const double grade = std::clamp(skill * answered / (config.grade_scale * full_answered), 0.0, 1.0);
    course.final_grade[id] = round_to(grade, 1e4);
    course.students.push_back(std::move(d));
  }
  return course;
}

std::vector<CourseData> synthesize_corpus(const CorpusConfig& config, std::uint64_t seed) {
  std::set<std::string> ids;
  for (const auto& c : config.courses)
    if (!ids.insert(c.course_id).second) throw Error(Errc::DuplicateCourseId, "course id '" + c.course_id + "' repeats");
  std::vector<CourseData> corpus;
  corpus.reserve(config.courses.size());
  for (std::size_t i = 0; i < config.courses.size(); ++i)
    corpus.push_back(synthesize_course(config.courses[i], mix_seed(seed, 0x1000 + i)));
  return corpus;
}

}  // namespace dropoutlab
