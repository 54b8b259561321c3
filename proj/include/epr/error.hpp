#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace epr {

enum class ErrorKind {
  DimensionMismatch,
  NotHermitian,
  NumericalFailure,
  SingularOperator,
  InvalidState,
  InvalidAlgebra,
  NotInvolution,
  NotCyclic,
  NotSeparating,
  NotInAlgebra,
  NotInCentralizer,
  NonCommutingAlgebras,
  PathDisagreement,
  ParseError,
  ValidationError,
  UnknownScenario,
  InvalidParams,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so that
/// callers (the CLI in particular) can map it onto an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace epr
