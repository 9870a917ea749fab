#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ivmr/estimate.hpp"
#include "ivmr/simulation.hpp"
#include "ivmr/sml.hpp"

namespace ivmr {

inline constexpr std::string_view kVersion = "0.1.0";

enum class ReportFormat { json, csv };

ReportFormat parse_report_format(std::string_view s);

struct ReportBundle {
  std::uint64_t seed = 0;
  /// Canonical configuration text; only its hash is written.
  std::string config;
  std::vector<EstimateReport> estimates;
  std::optional<PseudoRiskTable> risk_table;
  std::vector<std::string> candidate_names[5];  // per role, for the risk table
  std::optional<MonteCarloSummary> monte_carlo;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view text);

/// Rounds to 10 significant digits (the precision of every written float).
double round10(double v);
std::string format10(double v);

std::string render_report(const ReportBundle& bundle, ReportFormat format);

/// Throws IoError when the file cannot be written.
void write_report(const ReportBundle& bundle, const std::string& path, ReportFormat format);

}  // namespace ivmr
