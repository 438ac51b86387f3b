#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace opmodel {

enum class Errc {
  InvalidTask,
  InvalidArgument,
  BackendUnavailable,
  ScriptExhausted,
  ReplyParseError,
  CategoryError,
  NoCodeBlock,
  SplitFormatError,
  UnboundPlaceholder,
  IoError,
  EmptyLibrary,
  DimensionMismatch,
  OrderViolation,
  NoObjective,
  SchemaError,
  EmptySet,
};

std::string_view errc_name(Errc code) noexcept;

/// Single exception type for the library. `code()` carries the failure class
/// so callers can branch without a parallel exception hierarchy.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace opmodel
