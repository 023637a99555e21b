#pragma once

#include <stdexcept>
#include <string>

namespace gsketch {

enum class ErrorCode {
  kConfig,
  kMalformedLabel,
  kDegenerateStats,
  kPlanInvalid,
  kMalformedQuery,
  kUndefinedTruth,
  kEmptyQuerySet,
  kInsufficientData,
  kInsufficientPopulation,
  kOverflow,
  kParse,
  kIo,
  kFrozen,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return "configuration error";
    case ErrorCode::kMalformedLabel: return "malformed label";
    case ErrorCode::kDegenerateStats: return "degenerate vertex stats";
    case ErrorCode::kPlanInvalid: return "invalid plan";
    case ErrorCode::kMalformedQuery: return "malformed query";
    case ErrorCode::kUndefinedTruth: return "undefined truth";
    case ErrorCode::kEmptyQuerySet: return "empty query set";
    case ErrorCode::kInsufficientData: return "insufficient data";
    case ErrorCode::kInsufficientPopulation: return "insufficient population";
    case ErrorCode::kOverflow: return "counter overflow";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kFrozen: return "engine frozen";
  }
  return "error";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code),
        detail_(what) {}

  ErrorCode code() const noexcept { return code_; }

  /// The message without the leading code name.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace gsketch
