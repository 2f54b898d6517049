#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <random>
#include <sstream>
#include <string>
#include <utility>

#include "dropoutlab/dataset.hpp"

namespace fixtures {

using namespace dropoutlab;

inline CourseMeta meta(int weeks_to_t100 = 8, int weeks_after = 2, const std::string& id = "FIX101") {
  CourseMeta m;
  m.course_id = id;
  m.launch_date = Date::from_ymd(2014, 1, 6);
  m.t100_date = m.launch_date + 7 * weeks_to_t100;
  m.end_date = m.t100_date + 7 * weeks_after;
  m.cert_threshold = 0.7;
  m.field = Field::STEM;
  return m;
}

inline StudentDemographics student(const std::string& id) {
  StudentDemographics s;
  s.student_id = id;
  return s;
}

inline ActivityDay day(const std::string& id, Date date, double nevents) {
  ActivityDay a;
  a.student_id = id;
  a.date = date;
  a.counters[kNevents] = nevents;
  return a;
}

/// Empty course with `n` students s0..s{n-1}.
inline CourseData course(int n, int weeks_to_t100 = 8) {
  CourseData c;
  c.meta = meta(weeks_to_t100);
  for (int i = 0; i < n; ++i) c.students.push_back(student("s" + std::to_string(i)));
  return c;
}

/// Fresh empty temporary directory, unique per name.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dropoutlab_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace fixtures
