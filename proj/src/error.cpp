#include "ivmr/error.hpp"

namespace ivmr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonBinaryTreatment: return "NonBinaryTreatment";
    case ErrorCode::NonBinaryInstrument: return "NonBinaryInstrument";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DegenerateInstrument: return "DegenerateInstrument";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::TooFewObservations: return "TooFewObservations";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SingularWeightedSystem: return "SingularWeightedSystem";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::NonFiniteEvaluation: return "NonFiniteEvaluation";
    case ErrorCode::DegenerateInterval: return "DegenerateInterval";
    case ErrorCode::FoldFitFailure: return "FoldFitFailure";
    case ErrorCode::CandidateFitFailure: return "CandidateFitFailure";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonBinaryTreatment:
    case ErrorCode::NonBinaryInstrument:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::DegenerateInstrument:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::InvalidArgument:
    case ErrorCode::TooFewObservations:
    case ErrorCode::MissingColumn:
    case ErrorCode::ParseError:
    case ErrorCode::MissingField:
    case ErrorCode::IoError:
      return true;
    default:
      return false;
  }
}

namespace {
std::string decorate(ErrorCode code, const std::string& message, std::optional<std::size_t> row) {
  std::string out(to_string(code));
  if (row) out += " (row " + std::to_string(*row) + ")";
  if (!message.empty()) out += ": " + message;
  return out;
}
}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::optional<std::size_t> row)
    : std::runtime_error(decorate(code, message, row)), code_(code), row_(row) {}

}  // namespace ivmr
