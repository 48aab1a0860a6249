#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rgw/gw_objective.hpp"
#include "rgw/transport.hpp"

namespace rgw {

struct SolverConfig {
  double trim = 0.0;
  int restarts = 10;
  int max_iters = 1000;
  double fw_gap_tol = 1e-8;
  double obj_rel_tol = 1e-10;
  std::uint64_t seed = 0;
  double dummy_penalty_margin = 1.0;
  // Adds one start from the LMO of the distance-profile matching cost.
  bool profile_start = true;

  void validate() const;
};

struct SolveReport {
  double value = 0.0;  // sqrt of the best objective over all starts
  PartialCoupling coupling;
  std::vector<int> iterations_per_restart;
  double fw_gap_final = 0.0;
  std::vector<double> restart_values;
  double wall_time = 0.0;  // seconds
};

/// Frank-Wolfe for partial GW with exact LMO and exact line search.
///
/// Start 0 is the scaled product coupling (1 - trim) p q'; start r >= 1 is the
/// LMO vertex of an i.i.d. standard normal matrix drawn from the substream
/// (seed, "restart", r). With profile_start, one more start is the LMO vertex
/// of C[i,j] = W2^2 between the distributions of squared distances seen from
/// atom i and from atom j (skipped when m n (m + n) > 1e8). `warm_starts` are
/// feasible mass matrices appended after these. The value is an upper bound on the true
/// infimum; the problem is nonconvex.
///
/// The pair is solved in a canonical orientation (by a content fingerprint of
/// the two spaces) and transposed back, so swapping x and y yields the
/// transposed coupling and identical restart values.
SolveReport solve_pgw(const MMSpace& x, const MMSpace& y, const SolverConfig& config,
                      std::span<const Matrix> warm_starts = {});
SolveReport solve_gw(const MMSpace& x, const MMSpace& y, SolverConfig config);

/// Exhaustive oracle for tiny instances (m * n <= 9): scan a lattice of mass
/// placements with spacing (1 - eps) / grid, then polish the best lattice
/// points by exact-step coordinate descent along feasible two-cell transfers
/// and four-cell cycles. Returns the smallest sqrt(objective) found.
double brute_force_gw(const MMSpace& x, const MMSpace& y, double eps, int grid);

inline constexpr std::size_t kBruteForceMaxCells = 9;

}  // namespace rgw
