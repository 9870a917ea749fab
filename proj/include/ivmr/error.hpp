#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ivmr {

enum class ErrorCode {
  // input validation
  NonBinaryTreatment,
  NonBinaryInstrument,
  NonFiniteValue,
  DegenerateInstrument,
  IndexOutOfRange,
  InvalidArgument,
  TooFewObservations,
  MissingColumn,
  ParseError,
  MissingField,
  IoError,
  // estimation
  SingularWeightedSystem,
  RankDeficient,
  NoConvergence,
  SingularJacobian,
  NonFiniteEvaluation,
  DegenerateInterval,
  FoldFitFailure,
  CandidateFitFailure,
};

std::string_view to_string(ErrorCode code);

/// Input/configuration problems, as opposed to failures of a numerical routine.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> row = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  /// Offending (zero-based) data row, when the error is tied to one.
  std::optional<std::size_t> row() const noexcept { return row_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> row_;
};

}  // namespace ivmr
