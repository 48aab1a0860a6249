#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rgw/contamination.hpp"
#include "rgw/estimators.hpp"

namespace rgw {

struct SweepConfig {
  FamilySpec family;
  // Only kind and params are read; eps and seed are set per cell.
  ContaminationSpec adversary;
  std::vector<EstimatorSpec> estimators;
  std::vector<double> eps_grid;
  std::vector<std::size_t> n_grid;  // empty: population limit
  int trials = 1;
  std::uint64_t master_seed = 0;
  int clean_restart_factor = 4;
  bool record_wall_time = false;

  bool population_limit() const { return n_grid.empty(); }
  void validate() const;
};

/// Config in the run-config layout (see parse_run_config).
nlohmann::json to_json(const SweepConfig& cfg);

struct RiskRecord {
  std::string family;
  double k = 0.0;
  double sigma = 0.0;
  double eps = 0.0;
  std::size_t n = 0;
  int trial = 0;
  std::string estimator_kind;
  double estimate = 0.0;
  double clean_gw = 0.0;
  double abs_error = 0.0;
  double wall_time_s = 0.0;
  std::uint64_t seed = 0;
  // Diagnostics kept out of the CSV.
  double fw_gap = 0.0;
  std::size_t cell_order = 0;  // sort key: (eps index, n index, trial, estimator index)
  std::string error;           // nonempty when the trial's solve failed
};

struct SlopeFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::pair<double, double> eps_range{0.0, 0.0};
};

nlohmann::json to_json(const SlopeFit& fit);

struct SweepOptions {
  int jobs = 1;
  // Called once per finished trial, under a lock, in completion order.
  std::function<void(const std::vector<RiskRecord>&)> on_trial;
};

/// All records, sorted by (eps, n, trial, estimator) in config order.
std::vector<RiskRecord> run_sweep(const SweepConfig& config, const SweepOptions& options = {});

/// Seed of one (eps index, n index, trial) cell.
std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t eps_index, std::size_t n_index, int trial);

struct CleanPair {
  DiscreteMeasure mu;
  DiscreteMeasure nu;
  double certified_lower = 0.0;  // |gw_to_point(mu) - gw_to_point(nu)| <= GW(mu, nu)
};

/// Random pair of three-atom probability measures in R^dim whose GW distance
/// is certified to exceed `min_gw` through the point-mass lower bound.
CleanPair separated_pair(std::size_t dim, std::uint64_t seed, double min_gw = 0.1);

/// OLS of log(mean abs_error) on log(eps) over the records of one estimator
/// kind. Needs at least 3 distinct eps values with positive means.
SlopeFit fit_exponent(const std::vector<RiskRecord>& records, const std::string& estimator_kind);

/// E|gw_to_point(mu_n) - gw_to_point(mu)| over `trials` empirical measures
/// per n, with the population value in closed form.
std::vector<RiskRecord> convergence_study(const FamilySpec& family, const std::vector<std::size_t>& n_grid,
                                          int trials, std::uint64_t seed, int jobs = 1);

struct CellSummary {
  std::string estimator_kind;
  double eps = 0.0;
  std::size_t n = 0;
  std::size_t count = 0;
  std::size_t failures = 0;
  double mean_abs_error = 0.0;
  double stderr_abs_error = 0.0;
  double mean_estimate = 0.0;
  double mean_clean_gw = 0.0;
  double max_fw_gap = 0.0;
};

std::vector<CellSummary> summarize(const std::vector<RiskRecord>& records);

struct PropertyCheck {
  std::string name;
  bool hard = true;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

nlohmann::json to_json(const PropertyCheck& c);

/// Invariants of a finished sweep: record consistency, exact construction
/// risk of pgw on two-point cells, and nullity of pgw in the breakdown regime.
std::vector<PropertyCheck> sweep_checks(const SweepConfig& config, const std::vector<RiskRecord>& records);

nlohmann::json sweep_summary(const SweepConfig& config, const std::vector<RiskRecord>& records,
                             const std::vector<PropertyCheck>& checks);

struct MetricReport {
  std::vector<PropertyCheck> checks;
  bool passed() const;
};

/// Symmetry, isometry nullity, the approximate triangle inequality on small
/// triples, and the three-point counterexample to the exact triangle
/// inequality.
MetricReport metric_suite(std::uint64_t seed);

inline constexpr const char* kRecordCsvHeader =
    "family,k,sigma,eps,n,trial,estimator_kind,estimate,clean_gw,abs_error,wall_time_s,seed";

std::string record_csv_line(const RiskRecord& r);
void write_records_csv(const std::vector<RiskRecord>& records, const std::filesystem::path& path);

/// Runs fn(i) for i in [0, count) on `jobs` threads. The first exception is
/// rethrown after all threads finish.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace rgw
