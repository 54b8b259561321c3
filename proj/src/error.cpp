#include "epr/error.hpp"

namespace epr {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::SingularOperator: return "SingularOperator";
    case ErrorKind::InvalidState: return "InvalidState";
    case ErrorKind::InvalidAlgebra: return "InvalidAlgebra";
    case ErrorKind::NotInvolution: return "NotInvolution";
    case ErrorKind::NotCyclic: return "NotCyclic";
    case ErrorKind::NotSeparating: return "NotSeparating";
    case ErrorKind::NotInAlgebra: return "NotInAlgebra";
    case ErrorKind::NotInCentralizer: return "NotInCentralizer";
    case ErrorKind::NonCommutingAlgebras: return "NonCommutingAlgebras";
    case ErrorKind::PathDisagreement: return "PathDisagreement";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::UnknownScenario: return "UnknownScenario";
    case ErrorKind::InvalidParams: return "InvalidParams";
  }
  return "Unknown";
}

}  // namespace epr
