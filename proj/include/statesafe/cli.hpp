#pragma once

#include <CLI11.hpp>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "statesafe/builtin.hpp"
#include "statesafe/checker.hpp"
#include "statesafe/io.hpp"
#include "statesafe/scenarios.hpp"
#include "statesafe/simulator.hpp"
#include "statesafe/text.hpp"

namespace statesafe::cli {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline constexpr int kExitPass = 0;
inline constexpr int kExitViolation = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitTooLarge = 3;

namespace detail {

inline void parse_leastness(const std::string& text, CheckConfig& cfg) {
  if (text == "exhaustive") {
    cfg.leastness = LeastnessMode::Exhaustive;
    return;
  }
  if (text == "auto") {
    cfg.leastness = LeastnessMode::Auto;
    return;
  }
  if (text.rfind("sampled", 0) == 0) {
    cfg.leastness = LeastnessMode::Sampled;
    std::stringstream ss(text.substr(7));
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    // "sampled", "sampled:N" or "sampled:N:SEED"; parts[0] is the empty prefix.
    try {
      if (parts.size() > 3 || (!parts.empty() && !parts[0].empty())) throw std::invalid_argument(text);
      if (parts.size() >= 2) cfg.sample_count = std::stoull(parts[1]);
      if (parts.size() == 3) cfg.seed = std::stoull(parts[2]);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--leastness", "expected exhaustive or sampled:N:SEED");
    }
    if (cfg.sample_count == 0) throw CLI::ValidationError("--leastness", "sample count must be positive");
    return;
  }
  throw CLI::ValidationError("--leastness", "expected exhaustive or sampled:N:SEED");
}

inline io::json listing_json(const std::string& only) {
  io::json j;
  j["tool"] = io::kToolVersion;
  io::json specs = io::json::array();
  for (const auto& b : builtin::registry()) {
    if (!only.empty() && b.name != only) continue;
    const Model m(b.make(b.default_bounds));
    io::json s;
    s["name"] = b.name;
    s["summary"] = b.summary;
    s["default_bounds"] = io::bounds_to_json(b.default_bounds);
    io::json comps = io::json::array();
    for (const auto& f : m.spec().schema.components) {
      comps.push_back({{"name", f.name}, {"type", text::component_summary(f.schema)}});
    }
    s["components"] = std::move(comps);
    io::json ops = io::json::array();
    for (const auto& op : m.operations()) {
      io::json params = io::json::array();
      for (const auto& p : op.spec->params) params.push_back({{"name", p.name}, {"domain", p.domain.empty() ? p.range_key : p.domain}});
      ops.push_back({{"name", op.spec->name},
                     {"params", std::move(params)},
                     {"precondition", op.precondition.texts()},
                     {"effect", op.spec->effect_text}});
    }
    s["operations"] = std::move(ops);
    s["merge"] = m.spec().merge_text;
    if (m.has_leq()) s["comparison"] = m.leq_predicate().texts();
    if (m.has_pre_merge()) s["merge_precondition"] = m.pre_merge_predicate().texts();
    if (m.has_invariant()) s["invariant"] = m.invariant_predicate().texts();
    specs.push_back(std::move(s));
  }
  j["specs"] = std::move(specs);
  if (only.empty()) {
    io::json sc = io::json::array();
    for (const auto& s : sim::scenario_registry()) {
      sc.push_back({{"name", s.name}, {"summary", s.summary}, {"default_spec", s.default_spec}, {"bounds", io::bounds_to_json(s.bounds)}});
    }
    j["scenarios"] = std::move(sc);
  }
  return j;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MalformedEvent, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// Runs the command line `args` (without the program name).
inline CliResult run_cli(const std::vector<std::string>& args) {
  CliResult res;
  CLI::App app{"Verification workbench for state-based replicated data types", "statesafe"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(io::kToolVersion));

  std::string format = "text";
  std::string bounds_text;
  auto add_format = [&](CLI::App* cmd) {
    cmd->add_option("--format", format, "Output format")->check(CLI::IsMember({"text", "json"}));
  };

  // check
  auto* check = app.add_subcommand("check", "Run the checker pipeline on a built-in spec");
  std::string spec_name;
  std::string stage_text;
  std::string leastness_text;
  int max_cex = 3;
  bool no_stop = false;
  bool single_orientation = false;
  bool two_state = false;
  int jobs = 1;
  check->add_option("spec", spec_name, "Built-in spec name")->required();
  check->add_option("--bounds", bounds_text, "Bound overrides, k=v,...");
  check->add_option("--stage", stage_text, "Run only this stage");
  add_format(check);
  check->add_option("--max-cex", max_cex, "Counterexamples kept per assertion")->check(CLI::PositiveNumber);
  check->add_flag("--no-stop-on-failure", no_stop, "Run later stages after a failure");
  check->add_option("--leastness", leastness_text, "exhaustive or sampled:N:SEED");
  check->add_flag("--single-orientation", single_orientation, "Check Pre_merge in one orientation only");
  check->add_flag("--two-state", two_state, "Two-state formulation of merge.preserves_pre_merge");
  check->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run a scenario or a random execution");
  std::string scenario_path;
  std::string builtin_name;
  std::string sim_spec;
  std::string policy_text;
  bool random = false;
  std::uint64_t seed = 1;
  std::size_t steps = 1000;
  double drop = 0.0;
  double dup = 0.0;
  simulate->add_option("scenario", scenario_path, "Scenario file");
  simulate->add_option("--builtin", builtin_name, "Built-in scenario name");
  simulate->add_option("--spec", sim_spec, "Spec to run the scenario on");
  simulate->add_option("--bounds", bounds_text, "Bound overrides, k=v,...");
  simulate->add_option("--policy", policy_text, "On a false precondition")->check(CLI::IsMember({"halt", "skip_and_record"}));
  simulate->add_flag("--random", random, "Generate a random execution");
  simulate->add_option("--seed", seed, "Random seed");
  simulate->add_option("--steps", steps, "Random steps")->check(CLI::PositiveNumber);
  simulate->add_option("--drop", drop, "Drop probability")->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--dup", dup, "Duplicate probability")->check(CLI::Range(0.0, 1.0));
  add_format(simulate);

  // list
  auto* list = app.add_subcommand("list", "List built-in specs and scenarios");
  std::string list_spec;
  list->add_option("--spec", list_spec, "Show one spec in detail");
  add_format(list);

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    res.out = app.help();
    return res;
  } catch (const CLI::CallForVersion&) {
    res.out = std::string(io::kToolVersion) + "\n";
    return res;
  } catch (const CLI::ParseError& e) {
    res.code = kExitUsage;
    res.err = std::string(e.what()) + "\n";
    return res;
  }

  const bool json = format == "json";
  try {
    if (*check) {
      const auto& b = builtin::find(spec_name);
      CheckConfig cfg;
      cfg.stop_on_first_failure = !no_stop;
      cfg.max_counterexamples_per_assertion = max_cex;
      cfg.check_both_pre_merge_orientations = !single_orientation;
      cfg.merge_pre_merge = two_state ? MergePreMergeMode::TwoState : MergePreMergeMode::ThreeState;
      cfg.jobs = jobs;
      if (!leastness_text.empty()) detail::parse_leastness(leastness_text, cfg);
      if (!stage_text.empty()) {
        cfg.only_stage = parse_stage(stage_text);
        if (!cfg.only_stage) throw CLI::ValidationError("--stage", "unknown stage '" + stage_text + "'");
      }
      const DomainBounds bounds = io::parse_bounds(bounds_text, b.default_bounds);
      const CheckReport report = run_pipeline(b.make(bounds), cfg);
      std::unique_ptr<Model> model;
      try {
        model = std::make_unique<Model>(b.make(bounds));
      } catch (const Error&) {
      }
      res.out = json ? io::report_to_json(model.get(), report).dump(2) + "\n" : text::render_report(model.get(), report);
      res.code = report.exit_code();
      return res;
    }
    if (*simulate) {
      const int sources = (random ? 1 : 0) + (builtin_name.empty() ? 0 : 1) + (scenario_path.empty() ? 0 : 1);
      if (sources != 1) throw CLI::ValidationError("simulate", "give exactly one of a scenario file, --builtin or --random");
      sim::Trace trace;
      std::unique_ptr<Model> model;
      if (random) {
        if (sim_spec.empty()) throw CLI::ValidationError("--random", "needs --spec");
        const auto& b = builtin::find(sim_spec);
        model = std::make_unique<Model>(b.make(io::parse_bounds(bounds_text, b.default_bounds)));
        trace = sim::run_random(*model, {seed, steps, drop, dup, true});
      } else {
        sim::Scenario scenario;
        if (!builtin_name.empty()) {
          scenario = sim::make_scenario(builtin_name, sim_spec);
        } else {
          io::json doc;
          try {
            doc = io::json::parse(detail::read_file(scenario_path));
          } catch (const io::json::parse_error& e) {
            throw Error(ErrorKind::MalformedEvent, std::string("scenario is not valid JSON: ") + e.what());
          }
          auto loaded = io::load_scenario(doc, sim_spec);
          scenario = std::move(loaded.scenario);
        }
        if (!bounds_text.empty()) scenario.bounds = io::parse_bounds(bounds_text, scenario.bounds);
        if (!policy_text.empty()) scenario.policy = io::policy_from(policy_text);
        model = std::make_unique<Model>(builtin::make(scenario.spec, scenario.bounds));
        trace = sim::run_scenario(*model, scenario);
      }
      res.out = json ? io::trace_to_json(*model, trace).dump(2) + "\n" : text::render_trace(*model, trace);
      res.code = trace.exit_code();
      return res;
    }
    if (!list_spec.empty()) builtin::find(list_spec);
    res.out = json ? detail::listing_json(list_spec).dump(2) + "\n" : text::render_listing(list_spec);
    return res;
  } catch (const DomainTooLarge& e) {
    res.code = kExitTooLarge;
    res.err = std::string(e.what()) + "\n";
  } catch (const CLI::Error& e) {
    res.code = kExitUsage;
    res.err = std::string(e.what()) + "\n";
  } catch (const Error& e) {
    res.code = kExitUsage;
    res.err = std::string(e.what()) + "\n";
  } catch (const io::json::exception& e) {
    res.code = kExitUsage;
    res.err = std::string("MalformedEvent: ") + e.what() + "\n";
  }
  return res;
}

inline CliResult run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace statesafe::cli
