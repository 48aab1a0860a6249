#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "rgw/experiments.hpp"

namespace rgw {

enum class RunKind { risk_sweep, convergence, metric_suite };

/// Config document shared by the sweep-style commands:
///
///   { "family": {...}, "adversary": {"kind", "params"},
///     "estimators": [{...}] (or a single "estimator": {...}),
///     "solver": {...}  defaults for every estimator's solver,
///     "sweep": {"eps_grid", "n_grid", "trials", "clean_restart_factor",
///               "record_wall_time"},
///     "out_path": "results/run", "seed": 7 }
///
/// The layout is published as schemas/run_config.schema.json.
struct RunConfig {
  SweepConfig sweep;
  SolverConfig solver;
  std::string out_path;
  std::optional<std::uint64_t> seed;
};

/// Line and column (1-based) of every key and array element, by path
/// ("sweep.eps_grid", "estimators[0].kind").
std::map<std::string, std::pair<int, int>> locate_json_paths(const std::string& text);

/// Parses and validates a config. Every error is an InputError whose message
/// starts with "<source>:<line>:<column>: <path>: ".
RunConfig parse_run_config(const std::string& text, const std::string& source, RunKind kind);

/// The config with all defaults filled in and the given seed. Feeding it back
/// to parse_run_config reproduces the run.
nlohmann::json resolved_run_config(const RunConfig& cfg, std::uint64_t seed);

}  // namespace rgw
