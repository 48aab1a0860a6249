#include "rgw/gw_objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rgw/errors.hpp"

namespace rgw {

QuadraticDistortion::QuadraticDistortion(Matrix cost_x, Matrix cost_y)
    : cx_(std::move(cost_x)), cy_(std::move(cost_y)), ax_(cx_.cwiseProduct(cx_)), by_(cy_.cwiseProduct(cy_)) {}

double QuadraticDistortion::form(const Matrix& p1, const Matrix& p2) const {
  const Vector u1 = p1.rowwise().sum();
  const Vector u2 = p2.rowwise().sum();
  const Vector v1 = p1.colwise().sum().transpose();
  const Vector v2 = p2.colwise().sum().transpose();
  const double cross = (cx_ * p1 * cy_).cwiseProduct(p2).sum();
  return u1.dot(ax_ * u2) + v1.dot(by_ * v2) - 2.0 * cross;
}

Matrix QuadraticDistortion::gradient(const Matrix& p) const {
  const Vector au = ax_ * p.rowwise().sum();
  const Vector bv = by_ * p.colwise().sum().transpose();
  Matrix g = -4.0 * (cx_ * p * cy_);
  g.colwise() += 2.0 * au;
  g.rowwise() += 2.0 * bv.transpose();
  return g;
}

double QuadraticDistortion::support_value(const Matrix& p) const {
  struct Entry {
    Eigen::Index i, j;
    double w;
  };
  std::vector<Entry> nz;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      if (p(i, j) != 0.0) nz.push_back({i, j, p(i, j)});
    }
  }
  long double total = 0.0L;
  for (std::size_t a = 0; a < nz.size(); ++a) {
    long double row = 0.0L;
    for (std::size_t b = a + 1; b < nz.size(); ++b) {
      const double diff = cx_(nz[a].i, nz[b].i) - cy_(nz[a].j, nz[b].j);
      row += static_cast<long double>(diff * diff) * nz[b].w;
    }
    total += 2.0L * row * nz[a].w;
  }
  return static_cast<double>(total);
}

double QuadraticDistortion::accurate_value(const Matrix& p, std::size_t max_nonzeros) const {
  const auto nnz = static_cast<std::size_t>((p.array() != 0.0).count());
  if (nnz <= max_nonzeros) return support_value(p);
  return std::max(0.0, value(p));
}

PartialCoupling PartialCoupling::make(std::shared_ptr<const MMSpace> rows, std::shared_ptr<const MMSpace> cols,
                                      Matrix mass, double trim, double tol) {
  if (!rows || !cols) throw InputError("partial coupling: missing space");
  if (mass.rows() != static_cast<Eigen::Index>(rows->size()) ||
      mass.cols() != static_cast<Eigen::Index>(cols->size())) {
    throw InputError("partial coupling: mass matrix shape does not match the spaces");
  }
  if (!(trim >= 0.0 && trim <= 1.0)) throw InputError("partial coupling: trim must lie in [0, 1]");
  PartialCoupling pc{std::move(rows), std::move(cols), std::move(mass), trim};
  const double bad = pc.infeasibility();
  if (!(bad <= tol)) {
    throw InputError("partial coupling: infeasible mass matrix (violation " + std::to_string(bad) + ")");
  }
  return pc;
}

double PartialCoupling::infeasibility() const {
  double worst = std::max(0.0, -mass.minCoeff());
  const Vector u = row_marginal();
  const Vector v = col_marginal();
  const Vector p = row_space->weights();
  const Vector q = col_space->weights();
  worst = std::max(worst, (u - p).maxCoeff());
  worst = std::max(worst, (v - q).maxCoeff());
  worst = std::max(worst, std::abs(mass.sum() - (1.0 - trim)));
  return worst;
}

PartialCoupling PartialCoupling::transposed() const {
  return PartialCoupling{col_space, row_space, mass.transpose(), trim};
}

namespace {

void require_same_spaces(const PartialCoupling& a, const PartialCoupling& b) {
  auto same = [](const std::shared_ptr<const MMSpace>& s, const std::shared_ptr<const MMSpace>& t) {
    if (s == t) return true;
    return s->cost() == t->cost() && s->weights() == t->weights();
  };
  if (!same(a.row_space, b.row_space) || !same(a.col_space, b.col_space)) {
    throw InputError("couplings are defined on different spaces");
  }
  if (a.mass.rows() != b.mass.rows() || a.mass.cols() != b.mass.cols()) {
    throw InputError("couplings have different shapes");
  }
}

QuadraticDistortion distortion_of(const PartialCoupling& pi) {
  return QuadraticDistortion(pi.row_space->cost(), pi.col_space->cost());
}

}  // namespace

double distortion(const PartialCoupling& pi1, const PartialCoupling& pi2) {
  require_same_spaces(pi1, pi2);
  return std::sqrt(std::max(0.0, distortion_of(pi1).form(pi1.mass, pi2.mass)));
}

Matrix gradient(const PartialCoupling& pi) { return distortion_of(pi).gradient(pi.mass); }

ObjectiveReport evaluate(const PartialCoupling& pi) {
  const QuadraticDistortion q = distortion_of(pi);
  return ObjectiveReport{std::sqrt(std::max(0.0, q.value(pi.mass))), q.gradient(pi.mass), pi.row_marginal(),
                         pi.col_marginal()};
}

LineSearchResult line_search(const QuadraticDistortion& q, const Matrix& pi, const Matrix& grad_at_pi,
                             double value_at_pi, const Matrix& gamma) {
  const Matrix d = gamma - pi;
  LineSearchResult r;
  r.quad_a = q.form(d, d);
  r.quad_b = grad_at_pi.cwiseProduct(d).sum();
  const double a = r.quad_a;
  const double b = r.quad_b;
  if (a > 0.0) {
    r.step = std::clamp(-b / (2.0 * a), 0.0, 1.0);
  } else {
    // Concave or flat along the segment: the better endpoint wins.
    r.step = (a + b < 0.0) ? 1.0 : 0.0;
  }
  if (r.step == 0.0) {
    r.objective = value_at_pi;
    return r;
  }
  const Matrix next = (r.step == 1.0) ? gamma : Matrix(pi + r.step * d);
  r.objective = q.value(next);
  if (r.step < 1.0) {
    // Rounding in -b/2a can leave a sliver short of the far vertex.
    const double at_gamma = q.value(gamma);
    if (at_gamma <= r.objective) {
      r.step = 1.0;
      r.objective = at_gamma;
    }
  }
  if (r.objective > value_at_pi) {
    r.step = 0.0;
    r.objective = value_at_pi;
  }
  return r;
}

LineSearchResult line_search(const PartialCoupling& pi, const PartialCoupling& gamma) {
  require_same_spaces(pi, gamma);
  if (!gamma.is_feasible() || std::abs(gamma.trim - pi.trim) > 1e-12) {
    throw InputError("line_search: target coupling is infeasible for the trimmed coupling set");
  }
  const QuadraticDistortion q = distortion_of(pi);
  const double value = q.value(pi.mass);
  return line_search(q, pi.mass, q.gradient(pi.mass), value, gamma.mass);
}

double gw_to_point(const MMSpace& mu) {
  if (!mu.measure().is_probability()) throw InputError("gw_to_point: measure must be a probability measure");
  const Vector p = mu.weights();
  const Matrix& c = mu.cost();
  long double total = 0.0L;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    long double row = 0.0L;
    for (Eigen::Index k = i + 1; k < c.cols(); ++k) row += static_cast<long double>(c(i, k) * c(i, k)) * p(k);
    total += 2.0L * row * p(i);
  }
  return std::sqrt(static_cast<double>(total));
}

double gw_to_point(const DiscreteMeasure& mu) {
  if (!mu.is_probability()) throw InputError("gw_to_point: measure must be a probability measure");
  const Matrix& x = mu.points();
  const auto n = static_cast<Eigen::Index>(mu.size());
  if (n <= 2048) {
    long double total = 0.0L;
    for (Eigen::Index i = 0; i < n; ++i) {
      long double row = 0.0L;
      for (Eigen::Index k = i + 1; k < n; ++k) {
        const double c = (x.row(i) - x.row(k)).squaredNorm();
        row += static_cast<long double>(c * c) * mu.weight(static_cast<std::size_t>(k));
      }
      total += 2.0L * row * mu.weight(static_cast<std::size_t>(i));
    }
    return std::sqrt(static_cast<double>(total));
  }
  // With s_i = |x_i|^2:  sum p_i p_k |x_i - x_k|^4
  //   = 2 W sum p s^2 + 2 (sum p s)^2 + 4 |sum p x x'|_F^2 - 8 <sum p s x, sum p x>.
  const auto d = x.cols();
  long double w_total = 0.0L, s1 = 0.0L, s2 = 0.0L;
  Eigen::Matrix<long double, Eigen::Dynamic, 1> first = Eigen::Matrix<long double, Eigen::Dynamic, 1>::Zero(d);
  Eigen::Matrix<long double, Eigen::Dynamic, 1> weighted = Eigen::Matrix<long double, Eigen::Dynamic, 1>::Zero(d);
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> second =
      Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const long double w = mu.weight(static_cast<std::size_t>(i));
    const auto xi = x.row(i).cast<long double>();
    const long double s = xi.squaredNorm();
    w_total += w;
    s1 += w * s;
    s2 += w * s * s;
    first += w * xi.transpose();
    weighted += w * s * xi.transpose();
    second += w * xi.transpose() * xi;
  }
  const long double total =
      2.0L * w_total * s2 + 2.0L * s1 * s1 + 4.0L * second.squaredNorm() - 8.0L * weighted.dot(first);
  return std::sqrt(std::max(0.0, static_cast<double>(total)));
}

double pgw_to_point(const MMSpace& mu, double eps) {
  if (!(eps >= 0.0 && eps < 1.0)) throw InputError("pgw_to_point: eps must lie in [0, 1)");
  if (!mu.measure().is_probability()) throw InputError("pgw_to_point: measure must be a probability measure");
  const std::size_t n = mu.size();
  if (n > kPgwToPointMaxSupport) {
    throw InputError("pgw_to_point: support of " + std::to_string(n) + " atoms exceeds " +
                     std::to_string(kPgwToPointMaxSupport) + "; use the Frank-Wolfe solver (solve_pgw)");
  }
  if (eps == 0.0) return gw_to_point(mu);

  // m' A m with A = C.^2 has zero diagonal and nonnegative entries, so it is
  // concave along every transfer direction e_i - e_j. Those are the edge
  // directions of {0 <= m <= p, sum m = 1 - eps}, hence the minimum sits on a
  // vertex: every coordinate at 0 or p_i except at most one fractional one.
  const Vector p = mu.weights();
  const Matrix a = mu.cost().cwiseProduct(mu.cost());
  const double target = 1.0 - eps;
  double best = std::numeric_limits<double>::infinity();
  Vector m(static_cast<Eigen::Index>(n));
  const std::size_t subsets = std::size_t{1} << n;
  for (std::size_t f = 0; f < n; ++f) {
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      if (mask & (std::size_t{1} << f)) continue;
      long double full = 0.0L;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (std::size_t{1} << i)) full += p(static_cast<Eigen::Index>(i));
      }
      const double rest = static_cast<double>(target - full);
      const double pf = p(static_cast<Eigen::Index>(f));
      if (rest < -1e-15 || rest > pf + 1e-15) continue;
      for (std::size_t i = 0; i < n; ++i) {
        m(static_cast<Eigen::Index>(i)) = (mask & (std::size_t{1} << i)) ? p(static_cast<Eigen::Index>(i)) : 0.0;
      }
      m(static_cast<Eigen::Index>(f)) = std::clamp(rest, 0.0, pf);
      best = std::min(best, m.dot(a * m));
    }
  }
  return std::sqrt(std::max(0.0, best));
}

}  // namespace rgw
