#include "ivmr/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "ivmr/dml.hpp"
#include "ivmr/error.hpp"
#include "ivmr/numerics.hpp"
#include "ivmr/parametric.hpp"
#include "ivmr/sml.hpp"

namespace ivmr {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kRoleNames[5] = {"pi", "mu", "delta", "tau", "rho"};

const std::vector<std::string>& parametric_names() {
  static const std::vector<std::string> v{"delta1", "genius", "genius_eff", "mr", "ols", "tsiv"};
  return v;
}

template <class T>
T get_field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config field '") + key + "': " + e.what());
  }
}

void apply_config_file(RunConfig& c, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::IoError, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, "config '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "command") {
      // the subcommand on the command line decides
    } else if (key == "input") {
      c.input = get_field<std::string>(j, "input");
    } else if (key == "out") {
      c.out = get_field<std::string>(j, "out");
    } else if (key == "format") {
      c.format = parse_report_format(get_field<std::string>(j, "format"));
    } else if (key == "seed") {
      c.seed = get_field<std::uint64_t>(j, "seed");
    } else if (key == "threads") {
      c.threads = get_field<unsigned>(j, "threads");
    } else if (key == "columns") {
      if (!v.is_object()) throw Error(ErrorCode::InvalidArgument, "config field 'columns' must be an object");
      if (v.contains("y")) c.mapping.y = get_field<std::string>(v, "y");
      if (v.contains("a")) c.mapping.a = get_field<std::string>(v, "a");
      if (v.contains("z")) c.mapping.z = get_field<std::string>(v, "z");
      if (v.contains("x")) c.mapping.x = get_field<std::vector<std::string>>(v, "x");
    } else if (key == "estimators") {
      c.estimators = get_field<std::vector<std::string>>(j, "estimators");
    } else if (key == "models") {
      if (!v.is_object()) throw Error(ErrorCode::InvalidArgument, "config field 'models' must be an object");
      for (std::size_t r = 0; r < 5; ++r)
        if (v.contains(kRoleNames[r])) c.models[r] = get_field<std::vector<std::string>>(v, kRoleNames[r]);
    } else if (key == "candidates") {
      c.candidates = get_field<std::vector<std::string>>(j, "candidates");
    } else if (key == "K") {
      c.K = get_field<int>(j, "K");
    } else if (key == "S") {
      c.S = get_field<int>(j, "S");
    } else if (key == "reps") {
      c.reps = get_field<int>(j, "reps");
    } else if (key == "scenario") {
      c.scenario = parse_scenario(get_field<std::string>(j, "scenario"));
    } else if (key == "n") {
      c.n = get_field<std::size_t>(j, "n");
    } else if (key == "oracle") {
      c.oracle = get_field<bool>(j, "oracle");
    } else if (key == "forest_trees") {
      c.forest_trees = get_field<int>(j, "forest_trees");
    } else if (key == "boosting_trees") {
      c.boosting_trees = get_field<int>(j, "boosting_trees");
    } else if (key == "data_out") {
      c.data_out = get_field<std::string>(j, "data_out");
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown config field '" + key + "'");
    }
  }
}

std::vector<LearnerType> learner_types(const std::vector<std::string>& names) {
  std::vector<LearnerType> out;
  for (const auto& s : names) out.push_back(parse_learner_type(s));
  return out;
}

}  // namespace

void RunConfig::validate() const {
  static const std::vector<std::string> commands{"simulate", "estimate", "dml", "sml"};
  if (std::find(commands.begin(), commands.end(), command) == commands.end())
    throw Error(ErrorCode::MissingField, "a command is required: simulate, estimate, dml or sml");
  if (!seed) throw Error(ErrorCode::MissingField, "--seed is required");
  if (command != "simulate" && !input) throw Error(ErrorCode::MissingField, "--input is required for " + command);
  if (reps && *reps < 1) throw Error(ErrorCode::InvalidArgument, "--reps must be at least 1");
  if (K < 2 || K > kMaxFolds) throw Error(ErrorCode::InvalidArgument, "--K must lie in [2, 10]");
  if (S < 1) throw Error(ErrorCode::InvalidArgument, "--S must be at least 1");
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "--n must be at least 1");
  if (forest_trees < 1 || boosting_trees < 0) throw Error(ErrorCode::InvalidArgument, "bad tree counts");
  learner_types(candidates);
  if (command == "estimate") {
    for (const auto& e : estimators)
      if (std::find(parametric_names().begin(), parametric_names().end(), e) == parametric_names().end())
        throw Error(ErrorCode::InvalidArgument, "estimate does not support estimator '" + e + "'");
    for (const auto& m : models) CovariateSpec::parse(m);
  }
  if (command == "simulate") {
    const auto& known = monte_carlo_estimators();
    for (const auto& e : estimators)
      if (std::find(known.begin(), known.end(), e) == known.end())
        throw Error(ErrorCode::InvalidArgument, "unknown estimator '" + e + "'");
  }
}

std::string RunConfig::canonical() const {
  ordered_json j;
  j["command"] = command;
  j["input"] = input ? *input : "";
  j["format"] = format == ReportFormat::json ? "json" : "csv";
  j["seed"] = seed ? *seed : 0;
  j["columns"] = {{"y", mapping.y}, {"a", mapping.a}, {"z", mapping.z}, {"x", mapping.x}};
  j["estimators"] = estimators;
  ordered_json m;
  for (std::size_t r = 0; r < 5; ++r) m[kRoleNames[r]] = models[r];
  j["models"] = m;
  j["candidates"] = candidates;
  j["K"] = K;
  j["S"] = S;
  j["reps"] = reps ? *reps : 0;
  j["scenario"] = std::string(to_string(scenario));
  j["n"] = n;
  j["oracle"] = oracle;
  j["forest_trees"] = forest_trees;
  j["boosting_trees"] = boosting_trees;
  return j.dump();
}

RunConfig parse_run_config(const std::vector<std::string>& args) {
  CLI::App app{"Average treatment effect estimation with an invalid instrument", "ivmr"};
  app.require_subcommand(1);

  struct Flags {
    std::string config, input, out, format, scenario, data_out, y, a, z;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::vector<std::string> x, estimators, candidates;
    std::array<std::vector<std::string>, 5> models;
    int K = 2, S = 2, reps = 1, forest_trees = 200, boosting_trees = 200;
    std::size_t n = 2000;
    bool oracle = false;
  } f;
  std::map<std::string, CLI::Option*> opts;

  auto common = [&](CLI::App* sub) {
    auto add = [&opts, sub](const std::string& name, auto& var, const std::string& help) {
      opts[sub->get_name() + name] = sub->add_option(name, var, help);
      return opts[sub->get_name() + name];
    };
    add("--config", f.config, "JSON file with run settings; flags override it");
    add("--out", f.out, "report path (standard output when absent)");
    add("--format", f.format, "json or csv");
    add("--seed", f.seed, "random seed (required)");
    add("--threads", f.threads, "worker threads");
    return add;
  };
  auto data_flags = [&](CLI::App* sub, auto& add) {
    add("--input", f.input, "CSV file with a header row");
    add("--y", f.y, "outcome column");
    add("--a", f.a, "treatment column");
    add("--z", f.z, "instrument column");
    add("--x", f.x, "covariate columns (default: all others)")->delimiter(',');
    (void)sub;
  };
  auto tree_flags = [&](auto& add) {
    add("--forest-trees", f.forest_trees, "trees per forest");
    add("--boosting-trees", f.boosting_trees, "maximum boosting rounds");
  };

  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo study on the built-in design");
  {
    auto add = common(sim);
    add("--scenario", f.scenario, "S0, S1, S2 or S3");
    add("--n", f.n, "sample size per replication");
    add("--reps", f.reps, "replications");
    add("--estimators", f.estimators, "comma-separated estimator names")->delimiter(',');
    add("--candidates", f.candidates, "SML learner types")->delimiter(',');
    add("--K", f.K, "cross-fitting folds");
    add("--S", f.S, "SML splits");
    opts["simulate--oracle"] = sim->add_flag("--oracle", f.oracle, "add the true nuisances as SML candidates");
    add("--data-out", f.data_out, "also export the first replication's data as CSV");
    tree_flags(add);
  }
  CLI::App* est = app.add_subcommand("estimate", "Parametric estimators on a CSV file");
  {
    auto add = common(est);
    data_flags(est, add);
    add("--estimators", f.estimators, "comma-separated estimator names")->delimiter(',');
    for (std::size_t r = 0; r < 5; ++r)
      add(std::string("--") + kRoleNames[r] + "-spec", f.models[r], "feature tokens")->delimiter(',');
  }
  CLI::App* dml = app.add_subcommand("dml", "Cross-fitted estimator with machine-learned nuisances");
  {
    auto add = common(dml);
    data_flags(dml, add);
    add("--candidates", f.candidates, "learner types, one estimate each")->delimiter(',');
    add("--K", f.K, "folds");
    add("--reps", f.reps, "repeated fold draws combined by the median");
    tree_flags(add);
  }
  CLI::App* sml = app.add_subcommand("sml", "Learner selection by minimax pseudo-risk");
  {
    auto add = common(sml);
    data_flags(sml, add);
    add("--candidates", f.candidates, "learner types in every role")->delimiter(',');
    add("--S", f.S, "sample splits");
    add("--reps", f.reps, "repeated split draws combined by the median");
    tree_flags(add);
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  app.parse(rev);

  CLI::App* chosen = app.get_subcommands().front();
  const std::string cmd = chosen->get_name();
  auto given = [&](const std::string& name) {
    const auto it = opts.find(cmd + name);
    return it != opts.end() && it->second->count() > 0;
  };

  RunConfig c;
  if (given("--config")) apply_config_file(c, f.config);
  c.command = cmd;
  if (given("--input")) c.input = f.input;
  if (given("--out")) c.out = f.out;
  if (given("--format")) c.format = parse_report_format(f.format);
  if (given("--seed")) c.seed = f.seed;
  if (given("--threads")) c.threads = f.threads;
  if (given("--y")) c.mapping.y = f.y;
  if (given("--a")) c.mapping.a = f.a;
  if (given("--z")) c.mapping.z = f.z;
  if (given("--x")) c.mapping.x = f.x;
  if (given("--estimators")) c.estimators = f.estimators;
  for (std::size_t r = 0; r < 5; ++r)
    if (given(std::string("--") + kRoleNames[r] + "-spec")) c.models[r] = f.models[r];
  if (given("--candidates")) c.candidates = f.candidates;
  if (given("--K")) c.K = f.K;
  if (given("--S")) c.S = f.S;
  if (given("--reps")) c.reps = f.reps;
  if (given("--scenario")) c.scenario = parse_scenario(f.scenario);
  if (given("--n")) c.n = f.n;
  if (given("--oracle")) c.oracle = f.oracle;
  if (given("--forest-trees")) c.forest_trees = f.forest_trees;
  if (given("--boosting-trees")) c.boosting_trees = f.boosting_trees;
  if (given("--data-out")) c.data_out = f.data_out;
  return c;
}

namespace {

LearnerKind tuned_kind(LearnerType t, Family fam, const RunConfig& c) {
  LearnerKind k = LearnerKind::make(t, fam);
  k.forest.trees = c.forest_trees;
  k.boosting.trees = c.boosting_trees;
  return k;
}

// Median estimate; the spread across repetitions is folded into the SE.
EstimateReport combine_median(const std::vector<EstimateReport>& reps) {
  if (reps.size() == 1) return reps.front();
  std::vector<double> est;
  for (const auto& r : reps) est.push_back(r.estimate);
  const double med = median(est);
  std::vector<double> v;
  for (const auto& r : reps) v.push_back(r.std_error * r.std_error + (r.estimate - med) * (r.estimate - med));
  EstimateReport out = EstimateReport::make(reps.front().id, med, std::sqrt(median(v)), reps.front().label);
  out.diagnostics = reps.front().diagnostics;
  for (std::size_t i = 1; i < reps.size(); ++i) {
    out.diagnostics.trim += reps[i].diagnostics.trim;
    out.diagnostics.winsorized += reps[i].diagnostics.winsorized;
  }
  out.diagnostics.notes.push_back("median over " + std::to_string(reps.size()) + " repetitions");
  return out;
}

WorkingModels resolve_models(const RunConfig& c, std::size_t p) {
  std::array<CovariateSpec, 5> specs;
  for (std::size_t r = 0; r < 5; ++r) {
    if (c.models[r].empty()) {
      specs[r].columns.push_back(CovariateColumn::intercept());
      for (std::size_t j = 0; j < p; ++j) specs[r].columns.push_back(CovariateColumn::raw(j));
    } else {
      specs[r] = CovariateSpec::parse(c.models[r]);
    }
  }
  WorkingModels m{specs[0], specs[1], specs[2], specs[3], specs[4]};
  m.validate(p);
  return m;
}

ReportBundle run_simulate(const RunConfig& c) {
  MonteCarloConfig mc;
  mc.n = c.n;
  mc.replications = c.reps.value_or(200);
  mc.scenario = c.scenario;
  mc.estimators = c.estimators.empty() ? parametric_names() : c.estimators;
  mc.seed = *c.seed;
  mc.K = c.K;
  mc.S = c.S;
  if (!c.candidates.empty()) mc.sml_candidates = learner_types(c.candidates);
  mc.sml_oracle = c.oracle;
  mc.forest_trees = c.forest_trees;
  mc.boosting_trees = c.boosting_trees;
  ReportBundle b;
  b.monte_carlo = run_monte_carlo(mc);
  // Replication 1 draws its data from this stream.
  if (c.data_out) export_dataset_csv(generate_dataset(c.n, derive_seed(derive_seed(*c.seed, 0), 0)).data, *c.data_out);
  return b;
}

ReportBundle run_estimate(const RunConfig& c) {
  const Dataset data = load_csv(*c.input, c.mapping);
  const WorkingModels models = resolve_models(c, data.dim());
  const auto& names = c.estimators.empty() ? parametric_names() : c.estimators;
  ReportBundle b;
  std::optional<std::pair<EstimateReport, EstimateReport>> bench;
  for (const auto& name : names) {
    const auto pos = std::find(parametric_names().begin(), parametric_names().end(), name) - parametric_names().begin();
    ParametricConfig pc;
    pc.seed = derive_seed(*c.seed, static_cast<std::uint64_t>(pos));
    if (name == "delta1") b.estimates.push_back(estimate_delta1(data, models, pc));
    else if (name == "genius") b.estimates.push_back(estimate_genius(data, models, pc));
    else if (name == "genius_eff") b.estimates.push_back(estimate_genius_eff(data, models, pc));
    else if (name == "mr") b.estimates.push_back(estimate_mr(data, models, pc));
    else {
      if (!bench) bench = estimate_benchmarks(data, BenchmarkModels::defaults(data.dim()), pc);
      b.estimates.push_back(name == "ols" ? bench->first : bench->second);
    }
  }
  return b;
}

ReportBundle run_dml(const RunConfig& c) {
  const Dataset data = load_csv(*c.input, c.mapping);
  const auto types = learner_types(c.candidates.empty() ? std::vector<std::string>{"forest"} : c.candidates);
  const int R = c.reps.value_or(1);
  ReportBundle b;
  for (std::size_t t = 0; t < types.size(); ++t) {
    NuisanceLearnerSet kinds;
    for (Role r : kRoles) kinds.kinds[static_cast<std::size_t>(r)] = tuned_kind(types[t], role_family(r), c);
    std::vector<EstimateReport> reps;
    for (int r = 0; r < R; ++r) {
      const std::uint64_t seed = derive_seed(derive_seed(*c.seed, t), static_cast<std::uint64_t>(r));
      EstimateReport e = estimate_dml(data, kinds, CrossFitPlan{c.K, seed});
      e.label = "dml_" + to_string(types[t]);
      reps.push_back(std::move(e));
    }
    b.estimates.push_back(combine_median(reps));
  }
  return b;
}

ReportBundle run_sml(const RunConfig& c) {
  const Dataset data = load_csv(*c.input, c.mapping);
  std::vector<LearnerType> types = c.candidates.empty()
                                       ? std::vector<LearnerType>{LearnerType::lasso, LearnerType::forest,
                                                                  LearnerType::boosting}
                                       : learner_types(c.candidates);
  CandidateLists lists;
  ReportBundle b;
  for (Role r : kRoles) {
    for (LearnerType t : types) {
      lists.lists[static_cast<std::size_t>(r)].push_back(Candidate::learned(tuned_kind(t, role_family(r), c)));
      b.candidate_names[static_cast<std::size_t>(r)].push_back(to_string(t));
    }
  }
  const int R = c.reps.value_or(1);
  std::vector<EstimateReport> dagger, ddagger;
  for (int r = 0; r < R; ++r) {
    SmlConfig sc;
    sc.S = c.S;
    sc.seed = derive_seed(*c.seed, static_cast<std::uint64_t>(r));
    const SplitCache cache = build_cache(data, lists, sc);
    PseudoRiskTable table = compute_risk_table(cache);
    dagger.push_back(select_from_cache(cache, table, Criterion::dagger).report);
    ddagger.push_back(select_from_cache(cache, table, Criterion::ddagger).report);
    if (r == 0) b.risk_table = std::move(table);
  }
  auto merged = [](const std::vector<EstimateReport>& reps) {
    EstimateReport e = combine_median(reps);
    std::string label;
    for (std::size_t i = 0; i < reps.size(); ++i) label += (i ? " " : "") + reps[i].label;
    e.label = label;
    e.diagnostics.post_selection = true;
    return e;
  };
  b.estimates.push_back(merged(dagger));
  b.estimates.push_back(merged(ddagger));
  return b;
}

void write_error(std::ostream& err, std::string_view code, const std::string& message) {
  ordered_json j;
  j["error"] = std::string(code);
  j["message"] = message;
  err << j.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  try {
    c = parse_run_config(args);
  } catch (const CLI::CallForHelp&) {
    out << "usage: ivmr {simulate|estimate|dml|sml} [options]; run a subcommand with --help for its flags\n";
    return 0;
  } catch (const CLI::RequiredError& e) {
    write_error(err, to_string(ErrorCode::MissingField), e.what());
    return 1;
  } catch (const CLI::ParseError& e) {
    write_error(err, "UsageError", e.what());
    return 1;
  } catch (const Error& e) {
    write_error(err, to_string(e.code()), e.what());
    return is_validation_error(e.code()) ? 1 : 2;
  }

  try {
    c.validate();
    set_default_threads(c.threads);
    ReportBundle b;
    if (c.command == "simulate") b = run_simulate(c);
    else if (c.command == "estimate") b = run_estimate(c);
    else if (c.command == "dml") b = run_dml(c);
    else b = run_sml(c);
    b.seed = *c.seed;
    b.config = c.canonical();
    if (c.out)
      write_report(b, *c.out, c.format);
    else
      out << render_report(b, c.format);
    return 0;
  } catch (const Error& e) {
    write_error(err, to_string(e.code()), e.what());
    return is_validation_error(e.code()) ? 1 : 2;
  } catch (const std::exception& e) {
    write_error(err, "InternalError", e.what());
    return 2;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace ivmr
