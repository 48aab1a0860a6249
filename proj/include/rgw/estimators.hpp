#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rgw/measures.hpp"
#include "rgw/solvers.hpp"

namespace rgw {

enum class EstimatorKind { pgw, plugin_gw, tv_projection };

std::string to_string(EstimatorKind kind);
EstimatorKind parse_estimator_kind(const std::string& name);

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::pgw;
  double trim = 0.0;     // pgw only
  double radius = 1.0;   // tv_projection only
  // Sweeps set the pgw trim to trim_slack * eps.
  double trim_slack = 1.0;
  // Permits pgw trims in [1/3, 1), where no guarantee holds.
  bool allow_breakdown = false;
  SolverConfig solver;

  void validate() const;
};

nlohmann::json to_json(const SolverConfig& cfg);
nlohmann::json to_json(const EstimatorSpec& spec);
/// Keys absent from `j` take their values from `defaults`.
SolverConfig solver_from_json(const nlohmann::json& j, const std::string& path = "solver",
                              const SolverConfig& defaults = {});
EstimatorSpec estimator_from_json(const nlohmann::json& j, const std::string& path = "estimator",
                                  const SolverConfig& defaults = {});

struct Estimate {
  double value = 0.0;
  double fw_gap = 0.0;
};

/// Runs the estimator on an observed pair of probability measures.
Estimate estimate(const EstimatorSpec& spec, const MMSpace& mu_obs, const MMSpace& nu_obs);

/// Coordinatewise weighted median (lower median on ties).
Eigen::RowVectorXd weighted_median(const DiscreteMeasure& m);

struct Projection {
  DiscreteMeasure measure;  // renormalized
  double removed_mass = 0.0;
};

/// Projection onto measures supported in the ball of radius R around the
/// coordinatewise weighted median: drop the mass outside, renormalize.
Projection project_bounded_support(const DiscreteMeasure& m, double radius);

/// Rate envelope sigma^2 eps^(1/2 - 2/k) with constant 1; zero at eps = 0.
double resilience_bound(double sigma, double k, double eps);

struct ResilienceQuery {
  MMSpace measure;
  double eps = 0.0;
};

struct ResilienceResult {
  double value = 0.0;
  Vector weights;  // best candidate mu', on the support of the query measure
};

/// Lower bound on sup { GW(mu', mu) : mu' <= mu / (1 - eps) } by local search
/// over extreme points of the candidate set. Start 0 fills atoms closest to
/// the weighted median first; starts r >= 1 use random orders. Each start is
/// refined by adjacent swaps in its order.
ResilienceResult resilience_search_full(const ResilienceQuery& query, int restarts, std::uint64_t seed);
double resilience_search(const ResilienceQuery& query, int restarts, std::uint64_t seed);

/// resilience_search over an increasing eps grid where the best candidate of
/// each level is also scored at the next. The result is nondecreasing.
std::vector<double> resilience_profile(const MMSpace& measure, const std::vector<double>& eps_grid, int restarts,
                                       std::uint64_t seed);

/// GW(mu', mu) for candidate weights on the support of mu.
double resilience_score(const MMSpace& mu, const Vector& candidate, std::uint64_t seed);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x, double tol = 0.0) const { return x >= lo - tol && x <= hi + tol; }
};

/// Range of observed PGW values allowed around gw_clean by the estimator
/// sandwich: |gw_clean - pgw| <= err_mu + err_nu + rho_mu + rho_nu
/// + 3 eps gw_clean, where rho are resiliences at level 3 eps.
Interval sandwich_bound(double gw_clean, double pgw_observed, std::pair<double, double> sampling_errs,
                        std::pair<double, double> resiliences, double eps);

}  // namespace rgw
