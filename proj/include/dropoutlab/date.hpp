#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace dropoutlab {

/// Day-granular calendar date (proleptic Gregorian), stored as days since
/// 1970-01-01.
class Date {
 public:
  constexpr Date() = default;

  static constexpr Date from_days(std::int64_t days) { return Date(days); }
  static Date from_ymd(int year, unsigned month, unsigned day);

  /// Parses ISO-8601 `YYYY-MM-DD`; throws Error(BadDate) on anything else.
  static Date parse(std::string_view text);

  std::string iso() const;
  constexpr std::int64_t days() const { return days_; }
  int year() const;

  constexpr Date operator+(std::int64_t n) const { return Date(days_ + n); }
  constexpr Date operator-(std::int64_t n) const { return Date(days_ - n); }
  constexpr std::int64_t operator-(Date other) const { return days_ - other.days_; }

  constexpr auto operator<=>(const Date&) const = default;

 private:
  constexpr explicit Date(std::int64_t days) : days_(days) {}
  std::int64_t days_ = 0;
};

}  // namespace dropoutlab
