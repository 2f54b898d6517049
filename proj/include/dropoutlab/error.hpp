#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dropoutlab {

enum class Errc {
  MissingColumn,
  BadDate,
  NegativeCounter,
  DuplicateStudentDay,
  UnknownStudent,
  ParseError,
  BadConfig,
  DuplicateCourseId,
  EmptyMatrix,
  SchemaMismatch,
  SingleClass,
  NonFiniteLoss,
  EmptyList,
  BadShape,
  ShrinkNotAllowed,
  BadLayer,
  BeforeLaunch,
  WindowOutOfRange,
  SpecInvalid,
  IoError,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the Errc kinds so
/// callers (and the CLI's exit-code mapping) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace dropoutlab
