#include "dropoutlab/error.hpp"

namespace dropoutlab {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::BadDate: return "BadDate";
    case Errc::NegativeCounter: return "NegativeCounter";
    case Errc::DuplicateStudentDay: return "DuplicateStudentDay";
    case Errc::UnknownStudent: return "UnknownStudent";
    case Errc::ParseError: return "ParseError";
    case Errc::BadConfig: return "BadConfig";
    case Errc::DuplicateCourseId: return "DuplicateCourseId";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::SingleClass: return "SingleClass";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::EmptyList: return "EmptyList";
    case Errc::BadShape: return "BadShape";
    case Errc::ShrinkNotAllowed: return "ShrinkNotAllowed";
    case Errc::BadLayer: return "BadLayer";
    case Errc::BeforeLaunch: return "BeforeLaunch";
    case Errc::WindowOutOfRange: return "WindowOutOfRange";
    case Errc::SpecInvalid: return "SpecInvalid";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace dropoutlab
