#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ivmr/kernels.hpp"

namespace ivmr {

enum class EstimatorId { delta1, genius, genius_eff, mr, ols, tsiv, dml, sml_dagger, sml_ddagger };

std::string_view to_string(EstimatorId id);
EstimatorId parse_estimator_id(std::string_view name);

struct AuxCoefficient {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
};

struct Diagnostics {
  int solver_iterations = 0;
  bool converged = true;
  bool separation_detected = false;
  kernels::TrimCounts trim;
  std::size_t winsorized = 0;
  int solver_restarts = 0;
  /// Set when the SE ignores a data-driven selection step.
  bool post_selection = false;
  std::vector<std::string> notes;
};

struct EstimateReport {
  EstimatorId id = EstimatorId::mr;
  std::string label;
  double estimate = 0.0;
  double std_error = 0.0;
  std::pair<double, double> ci95{0.0, 0.0};
  std::optional<AuxCoefficient> aux;
  Diagnostics diagnostics;

  /// Fills ci95 as estimate +/- 1.96 se.
  static EstimateReport make(EstimatorId id, double estimate, double std_error, std::string label = {});
};

constexpr double kZ95 = 1.96;

}  // namespace ivmr
