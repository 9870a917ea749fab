#include "ivmr/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ivmr/error.hpp"

namespace ivmr {

namespace {

constexpr std::string_view kIds[] = {"delta1", "genius",     "genius_eff", "mr",         "ols",
                                     "tsiv",   "dml",        "sml_dagger", "sml_ddagger"};

}  // namespace

std::string_view to_string(EstimatorId id) { return kIds[static_cast<std::size_t>(id)]; }

EstimatorId parse_estimator_id(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kIds); ++i)
    if (kIds[i] == name) return static_cast<EstimatorId>(i);
  throw Error(ErrorCode::InvalidArgument, "unknown estimator '" + std::string(name) + "'");
}

EstimateReport EstimateReport::make(EstimatorId id, double estimate, double std_error, std::string label) {
  EstimateReport r;
  r.id = id;
  r.label = label.empty() ? std::string(to_string(id)) : std::move(label);
  r.estimate = estimate;
  r.std_error = std_error;
  r.ci95 = {estimate - kZ95 * std_error, estimate + kZ95 * std_error};
  return r;
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  throw Error(ErrorCode::InvalidArgument, "unknown format '" + std::string(s) + "'");
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string format10(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double round10(double v) {
  if (!std::isfinite(v)) return v;
  return std::strtod(format10(v).c_str(), nullptr);
}

namespace {

using nlohmann::ordered_json;

ordered_json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return round10(v);
}

ordered_json estimate_json(const EstimateReport& r) {
  ordered_json j;
  j["id"] = std::string(to_string(r.id));
  j["label"] = r.label;
  j["estimate"] = num(r.estimate);
  j["se"] = num(r.std_error);
  j["ci_lo"] = num(r.ci95.first);
  j["ci_hi"] = num(r.ci95.second);
  if (r.aux)
    j["aux"] = {{"name", r.aux->name}, {"estimate", num(r.aux->estimate)}, {"se", num(r.aux->std_error)}};
  else
    j["aux"] = nullptr;
  const Diagnostics& d = r.diagnostics;
  ordered_json dj;
  dj["converged"] = d.converged;
  dj["solver_iterations"] = d.solver_iterations;
  dj["solver_restarts"] = d.solver_restarts;
  dj["separation_detected"] = d.separation_detected;
  dj["pi_clamped"] = d.trim.pi_clamped;
  dj["denominator_floored"] = d.trim.denom_floored;
  dj["winsorized"] = d.winsorized;
  dj["post_selection"] = d.post_selection;
  dj["notes"] = d.notes;
  j["diagnostics"] = dj;
  return j;
}

ordered_json risk_json(const PseudoRiskTable& table, const std::vector<std::string> (&names)[5]) {
  ordered_json rows = ordered_json::array();
  for (const auto& row : table) {
    ordered_json j;
    std::vector<std::size_t> t;
    for (std::size_t v : row.tuple) t.push_back(v + 1);
    j["tuple"] = t;
    std::vector<std::string> learners;
    for (std::size_t r = 0; r < 5; ++r)
      if (row.tuple[r] < names[r].size()) learners.push_back(names[r][row.tuple[r]]);
    if (learners.size() == 5) j["learners"] = learners;
    for (std::size_t k = 0; k < 3; ++k) j["lambda_dagger_" + std::to_string(k + 1)] = num(row.lambda_dagger[k]);
    for (std::size_t k = 0; k < 3; ++k) j["lambda_ddagger_" + std::to_string(k + 1)] = num(row.lambda_ddagger[k]);
    j["risk_dagger"] = num(row.risk_dagger);
    j["risk_ddagger"] = num(row.risk_ddagger);
    rows.push_back(std::move(j));
  }
  return rows;
}

ordered_json mc_json(const MonteCarloSummary& s) {
  ordered_json j;
  j["scenario"] = std::string(to_string(s.config.scenario));
  j["n"] = s.config.n;
  j["replications"] = s.config.replications;
  j["truth"] = kTrueAte;
  j["clamped_treatment_probabilities"] = s.clamped;
  ordered_json rows = ordered_json::array();
  for (const auto& e : s.estimators) {
    ordered_json r;
    r["name"] = e.name;
    r["replications"] = e.replications;
    r["failures"] = e.failures;
    r["mean"] = num(e.mean);
    r["bias"] = num(e.bias);
    r["sd"] = num(e.sd);
    r["rmse"] = num(e.rmse);
    r["median_bias"] = num(e.median_bias);
    r["coverage"] = num(e.coverage);
    r["mean_se"] = num(e.mean_se);
    r["errors"] = e.errors;
    rows.push_back(std::move(r));
  }
  j["estimators"] = rows;
  return j;
}

char hex_digit(unsigned v) { return "0123456789abcdef"[v & 15u]; }

std::string hex64(std::uint64_t h) {
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[static_cast<std::size_t>(i)] = hex_digit(static_cast<unsigned>(h));
  return s;
}

std::string render_json(const ReportBundle& b) {
  ordered_json j;
  j["meta"] = {{"seed", b.seed}, {"version", std::string(kVersion)}, {"config_hash", hex64(fnv1a(b.config))}};
  ordered_json est = ordered_json::array();
  for (const auto& r : b.estimates) est.push_back(estimate_json(r));
  j["estimates"] = est;
  if (b.risk_table) j["risk_table"] = risk_json(*b.risk_table, b.candidate_names);
  if (b.monte_carlo) j["monte_carlo"] = mc_json(*b.monte_carlo);
  return j.dump(2) + "\n";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string render_csv(const ReportBundle& b) {
  std::ostringstream os;
  os << "id,label,estimate,se,ci_lo,ci_hi,aux_name,aux_estimate,aux_se,converged,solver_iterations,"
        "pi_clamped,denominator_floored,winsorized,post_selection\n";
  for (const auto& r : b.estimates) {
    const Diagnostics& d = r.diagnostics;
    os << to_string(r.id) << ',' << csv_field(r.label) << ',' << format10(r.estimate) << ','
       << format10(r.std_error) << ',' << format10(r.ci95.first) << ',' << format10(r.ci95.second) << ',';
    if (r.aux)
      os << csv_field(r.aux->name) << ',' << format10(r.aux->estimate) << ',' << format10(r.aux->std_error);
    else
      os << ",,";
    os << ',' << (d.converged ? 1 : 0) << ',' << d.solver_iterations << ',' << d.trim.pi_clamped << ','
       << d.trim.denom_floored << ',' << d.winsorized << ',' << (d.post_selection ? 1 : 0) << '\n';
  }
  // Further tables follow after a blank line, each with its own header.
  if (b.risk_table) {
    os << "\ntuple,lambda_dagger_1,lambda_dagger_2,lambda_dagger_3,lambda_ddagger_1,lambda_ddagger_2,"
          "lambda_ddagger_3,risk_dagger,risk_ddagger\n";
    for (const auto& row : *b.risk_table) {
      os << csv_field(format_tuple(row.tuple));
      for (double v : row.lambda_dagger) os << ',' << format10(v);
      for (double v : row.lambda_ddagger) os << ',' << format10(v);
      os << ',' << format10(row.risk_dagger) << ',' << format10(row.risk_ddagger) << '\n';
    }
  }
  if (b.monte_carlo) {
    os << "\nname,replications,failures,mean,bias,sd,rmse,median_bias,coverage,mean_se\n";
    for (const auto& e : b.monte_carlo->estimators)
      os << e.name << ',' << e.replications << ',' << e.failures << ',' << format10(e.mean) << ','
         << format10(e.bias) << ',' << format10(e.sd) << ',' << format10(e.rmse) << ',' << format10(e.median_bias)
         << ',' << format10(e.coverage) << ',' << format10(e.mean_se) << '\n';
  }
  return os.str();
}

}  // namespace

std::string render_report(const ReportBundle& bundle, ReportFormat format) {
  return format == ReportFormat::json ? render_json(bundle) : render_csv(bundle);
}

void write_report(const ReportBundle& bundle, const std::string& path, ReportFormat format) {
  const std::string text = render_report(bundle, format);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  f << text;
  f.flush();
  if (!f) throw Error(ErrorCode::IoError, "write to '" + path + "' failed");
}

}  // namespace ivmr
