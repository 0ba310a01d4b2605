#pragma once

#include <stdexcept>
#include <string>

namespace syntheval {

// Error taxonomy shared by all modules. The CLI maps `internal_error` to
// exit code 2 and everything else to exit code 1.
enum class errc {
  format_error,
  unsupported_datatype,
  dimension_error,
  io_error,
  duplicate_item,
  degenerate_vector,
  degenerate_intensity,
  dim_mismatch,
  param_error,
  undefined_dice,
  undefined_accuracy,
  no_positive,
  batch_too_small,
  missing_prototype,
  pairing_error,
  internal_error,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::format_error: return "FormatError";
    case errc::unsupported_datatype: return "UnsupportedDatatype";
    case errc::dimension_error: return "DimensionError";
    case errc::io_error: return "IoError";
    case errc::duplicate_item: return "DuplicateItem";
    case errc::degenerate_vector: return "DegenerateVector";
    case errc::degenerate_intensity: return "DegenerateIntensity";
    case errc::dim_mismatch: return "DimError";
    case errc::param_error: return "ParamError";
    case errc::undefined_dice: return "UndefinedDice";
    case errc::undefined_accuracy: return "UndefinedAccuracy";
    case errc::no_positive: return "NoPositiveError";
    case errc::batch_too_small: return "BatchTooSmall";
    case errc::missing_prototype: return "MissingPrototype";
    case errc::pairing_error: return "PairingError";
    case errc::internal_error: return "InternalError";
  }
  return "UnknownError";
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw error(code, msg); }

inline void require(bool cond, errc code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

}  // namespace syntheval
