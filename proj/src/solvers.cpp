#include "rgw/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <string>

#include "rgw/errors.hpp"
#include "rgw/seeding.hpp"

namespace rgw {

void SolverConfig::validate() const {
  if (!(trim >= 0.0 && trim < 1.0)) throw InputError("solver: trim must lie in [0, 1)");
  if (restarts < 1) throw InputError("solver: restarts must be positive");
  if (max_iters < 1) throw InputError("solver: max_iters must be positive");
  if (!(fw_gap_tol > 0.0)) throw InputError("solver: fw_gap_tol must be positive");
  if (!(obj_rel_tol > 0.0)) throw InputError("solver: obj_rel_tol must be positive");
  if (!(dummy_penalty_margin > 0.0)) throw InputError("solver: dummy_penalty_margin must be positive");
}

namespace {

std::uint64_t fingerprint(const MMSpace& s) {
  std::uint64_t h = mix64(s.size());
  auto feed = [&h](double x) {
    std::uint64_t bits = 0;
    x += 0.0;  // fold -0.0 into +0.0
    std::memcpy(&bits, &x, sizeof bits);
    h = mix64(h ^ bits);
  };
  for (double w : s.measure().weights()) feed(w);
  for (Eigen::Index i = 0; i < s.cost().size(); ++i) feed(s.cost().data()[i]);
  return h;
}

constexpr double kDustMass = 1e-13;
constexpr double kProfileWorkLimit = 1e8;

// Squared 2-Wasserstein distance between two 1D distributions of equal mass,
// given as value-sorted (value, weight) lists.
double w2_squared_1d(const std::vector<std::pair<double, double>>& a,
                     const std::vector<std::pair<double, double>>& b) {
  double total = 0.0;
  std::size_t i = 0, j = 0;
  double ra = a.empty() ? 0.0 : a[0].second;
  double rb = b.empty() ? 0.0 : b[0].second;
  while (i < a.size() && j < b.size()) {
    const double step = std::min(ra, rb);
    const double d = a[i].first - b[j].first;
    total += step * d * d;
    ra -= step;
    rb -= step;
    if (ra <= 0.0 && ++i < a.size()) ra = a[i].second;
    if (rb <= 0.0 && ++j < b.size()) rb = b[j].second;
  }
  return total;
}

std::vector<std::vector<std::pair<double, double>>> distance_profiles(const Matrix& cost, const Vector& w,
                                                                      bool weighted) {
  std::vector<std::vector<std::pair<double, double>>> out(static_cast<std::size_t>(cost.rows()));
  const double uniform = 1.0 / static_cast<double>(cost.cols());
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    auto& prof = out[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < cost.cols(); ++k) {
      if (!weighted) {
        prof.emplace_back(cost(i, k), uniform);
      } else if (w(k) > 0.0) {
        prof.emplace_back(cost(i, k), w(k) / w.sum());
      }
    }
    std::sort(prof.begin(), prof.end());
  }
  return out;
}

// Cost of matching atom i with atom j: how far apart their distributions of
// squared distances to the rest of their space are.
Matrix profile_cost(const Matrix& cx, const Vector& p, const Matrix& cy, const Vector& q, bool weighted) {
  const auto px = distance_profiles(cx, p, weighted);
  const auto py = distance_profiles(cy, q, weighted);
  Matrix c(cx.rows(), cy.rows());
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      c(i, j) = w2_squared_1d(px[static_cast<std::size_t>(i)], py[static_cast<std::size_t>(j)]);
    }
  }
  return c;
}

struct RunOutcome {
  Matrix coupling;
  double objective = 0.0;  // decomposition value, used for descent bookkeeping
  int iterations = 0;
  double gap = 0.0;
};

RunOutcome frank_wolfe(const QuadraticDistortion& q, const Vector& p, const Vector& qw, Matrix pi,
                       const SolverConfig& cfg) {
  RunOutcome out;
  // Gap test is relative to F, floored at the rounding level of the
  // decomposition (about 1e-16 * max cost^2 per term).
  const double cmax = std::max(q.cost_x().cwiseAbs().maxCoeff(), q.cost_y().cwiseAbs().maxCoeff());
  const double floor = 1e-14 * std::max(1e-300, cmax * cmax);
  double value = q.value(pi);
  Matrix grad = q.gradient(pi);
  double gap = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    const Matrix gamma = partial_lmo(grad, p, qw, cfg.trim, cfg.dummy_penalty_margin);
    gap = grad.cwiseProduct(pi - gamma).sum();
    if (gap <= cfg.fw_gap_tol * std::max(floor, value)) break;
    const LineSearchResult ls = line_search(q, pi, grad, value, gamma);
    if (ls.step == 0.0) break;
    pi = (ls.step == 1.0) ? gamma : Matrix((1.0 - ls.step) * pi + ls.step * gamma);
    if (ls.objective > value) throw NumericalError("frank-wolfe: objective increased");
    const double decrease = value - ls.objective;
    value = ls.objective;
    grad = q.gradient(pi);
    if (decrease <= cfg.obj_rel_tol * std::abs(value + decrease)) {
      ++it;
      gap = grad.cwiseProduct(pi - partial_lmo(grad, p, qw, cfg.trim, cfg.dummy_penalty_margin)).sum();
      break;
    }
  }
  out.coupling = std::move(pi);
  out.objective = value;
  out.iterations = it;
  out.gap = gap;
  return out;
}

}  // namespace

SolveReport solve_pgw(const MMSpace& x, const MMSpace& y, const SolverConfig& config,
                      std::span<const Matrix> warm_starts) {
  config.validate();
  if (!x.measure().is_probability() || !y.measure().is_probability()) {
    throw InputError("solve_pgw: both measures must be probability measures");
  }
  if (x.size() == 0 || y.size() == 0) throw InputError("solve_pgw: empty measure");
  const auto started = std::chrono::steady_clock::now();

  const bool flip = fingerprint(x) > fingerprint(y);
  const MMSpace& a = flip ? y : x;
  const MMSpace& b = flip ? x : y;
  const QuadraticDistortion q(a.cost(), b.cost());
  const Vector p = a.weights();
  const Vector qw = b.weights();

  std::vector<Matrix> starts;
  starts.push_back((1.0 - config.trim) * p * qw.transpose());
  for (int r = 1; r < config.restarts; ++r) {
    Rng rng = make_rng(derive_seed(config.seed, "restart", static_cast<std::uint64_t>(r)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix noise(p.size(), qw.size());
    for (Eigen::Index i = 0; i < noise.rows(); ++i) {
      for (Eigen::Index j = 0; j < noise.cols(); ++j) noise(i, j) = normal(rng);
    }
    starts.push_back(partial_lmo(noise, p, qw, config.trim, config.dummy_penalty_margin));
  }
  const double m = static_cast<double>(p.size()), n = static_cast<double>(qw.size());
  if (config.profile_start && m * n * (m + n) <= kProfileWorkLimit) {
    for (bool weighted : {true, false}) {
      starts.push_back(partial_lmo(profile_cost(a.cost(), p, b.cost(), qw, weighted), p, qw, config.trim,
                                   config.dummy_penalty_margin));
    }
  }
  for (const Matrix& w : warm_starts) {
    if (w.rows() != static_cast<Eigen::Index>(x.size()) || w.cols() != static_cast<Eigen::Index>(y.size())) {
      throw InputError("solve_pgw: warm start has the wrong shape");
    }
    const Matrix s = flip ? Matrix(w.transpose()) : w;
    const double tol = 1e-9;
    if (s.minCoeff() < -tol || (s.rowwise().sum() - p).maxCoeff() > tol ||
        (s.colwise().sum().transpose() - qw).maxCoeff() > tol || std::abs(s.sum() - (1.0 - config.trim)) > tol) {
      throw InputError("solve_pgw: warm start is not a feasible partial coupling");
    }
    starts.push_back(s);
  }

  SolveReport report;
  double best = std::numeric_limits<double>::infinity();
  Matrix best_coupling;
  for (const Matrix& start : starts) {
    RunOutcome run = frank_wolfe(q, p, qw, start, config);
    double f = q.accurate_value(run.coupling);
    // Drop rounding dust left by the LMO on far-apart cells.
    Matrix cleaned = (run.coupling.array() < kDustMass).select(0.0, run.coupling);
    if (std::abs(cleaned.sum() - run.coupling.sum()) <= 1e-10) {
      const double fc = q.accurate_value(cleaned);
      if (fc < f) {
        f = fc;
        run.coupling = std::move(cleaned);
      }
    }
    const double v = std::sqrt(f);
    report.restart_values.push_back(v);
    report.iterations_per_restart.push_back(run.iterations);
    if (v < best) {
      best = v;
      best_coupling = std::move(run.coupling);
      report.fw_gap_final = run.gap;
    }
  }
  report.value = best;
  auto xs = std::make_shared<const MMSpace>(x);
  auto ys = std::make_shared<const MMSpace>(y);
  report.coupling = PartialCoupling{xs, ys, flip ? Matrix(best_coupling.transpose()) : best_coupling, config.trim};
  if (!report.coupling.is_feasible(1e-9)) throw NumericalError("solve_pgw: returned coupling is infeasible");
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

SolveReport solve_gw(const MMSpace& x, const MMSpace& y, SolverConfig config) {
  config.trim = 0.0;
  return solve_pgw(x, y, config);
}

namespace {

// Exhaustive search state for brute_force_gw on the flattened coupling
// vector (cell c = i * n + j) with F(x) = x' L x.
class LatticeSearch {
 public:
  LatticeSearch(const MMSpace& x, const MMSpace& y, double eps, int grid)
      : m_(static_cast<int>(x.size())), n_(static_cast<int>(y.size())), cells_(m_ * n_), eps_(eps), grid_(grid),
        p_(x.weights()), q_(y.weights()), L_(cells_, cells_) {
    for (int a = 0; a < cells_; ++a) {
      for (int b = 0; b < cells_; ++b) {
        const double d = x.cost()(a / n_, b / n_) - y.cost()(a % n_, b % n_);
        L_(a, b) = d * d;
      }
    }
  }

  double run() {
    current_ = Vector::Zero(cells_);
    if (m_ == 1 || n_ == 1) {
      if (eps_ == 0.0) {
        for (int c = 0; c < cells_; ++c) current_(c) = (m_ == 1) ? q_(c) : p_(c);
        offer(current_);
      } else {
        enumerate_partial(0, 0.0);
      }
    } else if (eps_ == 0.0) {
      enumerate_full(0);
    } else {
      enumerate_partial(0, 0.0);
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [value, point] : top_) {
      Vector x = point;
      best = std::min(best, polish(x));
    }
    return std::sqrt(std::max(0.0, best));
  }

 private:
  static constexpr std::size_t kKeep = 8;
  static constexpr int kSweeps = 200;

  double objective(const Vector& x) const { return x.dot(L_ * x); }

  void offer(const Vector& x) {
    const double v = objective(x);
    if (top_.size() == kKeep && v >= top_.back().first) return;
    auto at = std::upper_bound(top_.begin(), top_.end(), v,
                               [](double lhs, const auto& e) { return lhs < e.first; });
    top_.insert(at, {v, x});
    if (top_.size() > kKeep) top_.pop_back();
  }

  double row_sum(const Vector& x, int i) const { return x.segment(i * n_, n_).sum(); }
  double col_sum(const Vector& x, int j) const {
    double s = 0.0;
    for (int i = 0; i < m_; ++i) s += x(i * n_ + j);
    return s;
  }

  // eps = 0: choose the (m-1)(n-1) leading cells on the lattice 1/grid; the
  // last row and column are then fixed by the marginals.
  void enumerate_full(int k) {
    const int free_cols = n_ - 1;
    if (k == (m_ - 1) * free_cols) {
      Vector x = current_;
      for (int i = 0; i < m_ - 1; ++i) {
        double used = 0.0;
        for (int j = 0; j < free_cols; ++j) used += x(i * n_ + j);
        x(i * n_ + n_ - 1) = p_(i) - used;
      }
      for (int j = 0; j < n_; ++j) {
        double used = 0.0;
        for (int i = 0; i < m_ - 1; ++i) used += x(i * n_ + j);
        x((m_ - 1) * n_ + j) = q_(j) - used;
      }
      if (x.minCoeff() < -1e-12) return;
      x = x.cwiseMax(0.0);
      offer(x);
      return;
    }
    const int i = k / free_cols;
    const int j = k % free_cols;
    const int c = i * n_ + j;
    double row_used = 0.0;
    for (int jj = 0; jj < j; ++jj) row_used += current_(i * n_ + jj);
    double col_used = 0.0;
    for (int ii = 0; ii < i; ++ii) col_used += current_(ii * n_ + j);
    const double cap = std::min(p_(i) - row_used, q_(j) - col_used);
    const double unit = 1.0 / grid_;
    for (int units = 0;; ++units) {
      const double v = units * unit;
      if (v > cap + 1e-12) break;
      current_(c) = v;
      enumerate_full(k + 1);
    }
    current_(c) = 0.0;
  }

  // eps > 0: every cell but the last on the lattice (1 - eps)/grid, the last
  // cell takes the remainder of the total mass.
  void enumerate_partial(int c, double used) {
    const double total = 1.0 - eps_;
    const double remaining = total - used;
    if (c == cells_ - 1) {
      const int i = c / n_, j = c % n_;
      const double row_slack = p_(i) - row_sum(current_, i);
      const double col_slack = q_(j) - col_sum(current_, j);
      if (remaining < -1e-12 || remaining > std::min(row_slack, col_slack) + 1e-12) return;
      current_(c) = std::max(0.0, remaining);
      offer(current_);
      current_(c) = 0.0;
      return;
    }
    const int i = c / n_, j = c % n_;
    // Mass the unassigned cells (this one included) can still absorb.
    double rows_cap = p_(i) - row_sum(current_, i);
    for (int ii = i + 1; ii < m_; ++ii) rows_cap += p_(ii);
    double cols_cap = 0.0;
    for (int jj = 0; jj < n_; ++jj) cols_cap += q_(jj) - col_sum(current_, jj);
    if (std::min(rows_cap, cols_cap) < remaining - 1e-12) return;
    const double cap = std::min({p_(i) - row_sum(current_, i), q_(j) - col_sum(current_, j), remaining});
    const double unit = total / grid_;
    for (int units = 0;; ++units) {
      const double v = units * unit;
      if (v > cap + 1e-12) break;
      current_(c) = v;
      enumerate_partial(c + 1, used + v);
    }
    current_(c) = 0.0;
  }

  // Exact minimization of F along `dir` (sparse, given as cell/coef pairs)
  // within [lo, hi]; applies the step when it strictly improves.
  bool try_move(Vector& x, Vector& g, double& value, const int* cells, const double* coef, int k, double lo,
                double hi) const {
    if (!(hi > lo)) return false;
    double slope = 0.0, curv = 0.0;
    for (int s = 0; s < k; ++s) {
      slope += coef[s] * g(cells[s]);
      for (int t = 0; t < k; ++t) curv += coef[s] * coef[t] * L_(cells[s], cells[t]);
    }
    auto phi = [&](double t) { return value + slope * t + curv * t * t; };
    double t = 0.0;
    if (curv > 0.0) {
      t = std::clamp(-slope / (2.0 * curv), lo, hi);
    } else {
      t = phi(lo) < phi(hi) ? lo : hi;
    }
    if (t == 0.0 || !(phi(t) < value)) return false;
    Vector next = x;
    for (int s = 0; s < k; ++s) next(cells[s]) = std::max(0.0, next(cells[s]) + t * coef[s]);
    const double exact = objective(next);
    if (!(exact < value)) return false;
    x = std::move(next);
    g = 2.0 * (L_ * x);
    value = exact;
    return true;
  }

  double polish(Vector& x) const {
    Vector g = 2.0 * (L_ * x);
    double value = objective(x);
    for (int sweep = 0; sweep < kSweeps; ++sweep) {
      bool moved = false;
      // Four-cell cycles keep both marginals.
      for (int i = 0; i < m_; ++i) {
        for (int k = i + 1; k < m_; ++k) {
          for (int j = 0; j < n_; ++j) {
            for (int l = j + 1; l < n_; ++l) {
              const int cells[4] = {i * n_ + j, k * n_ + l, i * n_ + l, k * n_ + j};
              const double coef[4] = {1.0, 1.0, -1.0, -1.0};
              const double hi = std::min(x(cells[2]), x(cells[3]));
              const double lo = -std::min(x(cells[0]), x(cells[1]));
              moved |= try_move(x, g, value, cells, coef, 4, lo, hi);
            }
          }
        }
      }
      if (eps_ > 0.0) {
        // Transfers a -> b keep the total mass; sub-marginals bound the step.
        for (int a = 0; a < cells_; ++a) {
          for (int b = 0; b < cells_; ++b) {
            if (a == b) continue;
            const int ia = a / n_, ja = a % n_, ib = b / n_, jb = b % n_;
            double hi = x(a);
            if (ib != ia) hi = std::min(hi, p_(ib) - row_sum(x, ib));
            if (jb != ja) hi = std::min(hi, q_(jb) - col_sum(x, jb));
            const int cells[2] = {b, a};
            const double coef[2] = {1.0, -1.0};
            moved |= try_move(x, g, value, cells, coef, 2, 0.0, std::max(0.0, hi));
          }
        }
      }
      if (!moved) break;
    }
    return value;
  }

  int m_, n_, cells_;
  double eps_;
  int grid_;
  Vector p_, q_;
  Matrix L_;
  Vector current_;
  std::vector<std::pair<double, Vector>> top_;
};

}  // namespace

double brute_force_gw(const MMSpace& x, const MMSpace& y, double eps, int grid) {
  if (!(eps >= 0.0 && eps < 1.0)) throw InputError("brute_force_gw: eps must lie in [0, 1)");
  if (grid < 1) throw InputError("brute_force_gw: grid must be positive");
  if (x.size() == 0 || y.size() == 0) throw InputError("brute_force_gw: empty measure");
  if (x.size() * y.size() > kBruteForceMaxCells) {
    throw InputError("brute_force_gw: instance too large (" + std::to_string(x.size() * y.size()) +
                     " coupling cells, limit " + std::to_string(kBruteForceMaxCells) + ")");
  }
  if (!x.measure().is_probability() || !y.measure().is_probability()) {
    throw InputError("brute_force_gw: both measures must be probability measures");
  }
  return LatticeSearch(x, y, eps, grid).run();
}

}  // namespace rgw
