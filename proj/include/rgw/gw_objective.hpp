#pragma once

#include <memory>

#include "rgw/measures.hpp"

namespace rgw {

/// The quadratic distortion functional on m x n mass matrices,
///
///   Q(P1, P2) = sum_{i,j,k,l} (Cx[i,k] - Cy[j,l])^2 P1[i,j] P2[k,l],
///
/// evaluated through the marginal decomposition
///
///   Q(P1, P2) = u1' A u2 + v1' B v2 - 2 <Cx P1 Cy, P2>,
///
/// with A = Cx.^2, B = Cy.^2 and u, v the row/column sums. The decomposition
/// is evaluated for arbitrary (not necessarily feasible) matrices, which is
/// what the line search and finite-difference checks need.
class QuadraticDistortion {
 public:
  QuadraticDistortion(Matrix cost_x, Matrix cost_y);

  Eigen::Index rows() const { return cx_.rows(); }
  Eigen::Index cols() const { return cy_.rows(); }
  const Matrix& cost_x() const { return cx_; }
  const Matrix& cost_y() const { return cy_; }

  double form(const Matrix& p1, const Matrix& p2) const;
  /// F(P) = Q(P, P).
  double value(const Matrix& p) const { return form(p, p); }
  /// Gradient of F on the ambient matrix space.
  Matrix gradient(const Matrix& p) const;
  /// F(P) as a sum over pairs of nonzero entries of P. Free of the
  /// cancellation the decomposition suffers when F is tiny relative to the
  /// costs; cost is quadratic in the number of nonzeros.
  double support_value(const Matrix& p) const;
  /// support_value when P has at most `max_nonzeros` nonzeros, value() otherwise.
  double accurate_value(const Matrix& p, std::size_t max_nonzeros = 2048) const;

 private:
  Matrix cx_, cy_, ax_, by_;
};

/// Nonnegative mass matrix between two mm-spaces with total mass 1 - trim and
/// row/column sums dominated by the two measures.
struct PartialCoupling {
  std::shared_ptr<const MMSpace> row_space;
  std::shared_ptr<const MMSpace> col_space;
  Matrix mass;
  double trim = 0.0;

  /// Validates shape and feasibility within `tol`; throws InputError otherwise.
  static PartialCoupling make(std::shared_ptr<const MMSpace> rows, std::shared_ptr<const MMSpace> cols,
                              Matrix mass, double trim, double tol = 1e-9);

  /// Largest violation of nonnegativity, the sub-marginal bounds, and the
  /// total-mass constraint.
  double infeasibility() const;
  bool is_feasible(double tol = 1e-9) const { return infeasibility() <= tol; }
  Vector row_marginal() const { return mass.rowwise().sum(); }
  Vector col_marginal() const { return mass.colwise().sum().transpose(); }
  PartialCoupling transposed() const;
};

struct ObjectiveReport {
  double value = 0.0;  // the distortion G(pi, pi), i.e. sqrt(F(pi))
  Matrix gradient;
  Vector row_marginal;
  Vector col_marginal;
};

struct LineSearchResult {
  double step = 0.0;
  double objective = 0.0;  // F at the new point
  double quad_a = 0.0;     // F(pi + t d) = a t^2 + b t + c
  double quad_b = 0.0;
};

/// sqrt(Q(pi1, pi2)); both couplings must live on the same pair of spaces.
double distortion(const PartialCoupling& pi1, const PartialCoupling& pi2);
Matrix gradient(const PartialCoupling& pi);
ObjectiveReport evaluate(const PartialCoupling& pi);

/// Exact minimizer of F along the segment from pi to gamma.
LineSearchResult line_search(const PartialCoupling& pi, const PartialCoupling& gamma);
/// Same, on raw matrices with a precomputed gradient at `pi`.
LineSearchResult line_search(const QuadraticDistortion& q, const Matrix& pi, const Matrix& grad_at_pi,
                             double value_at_pi, const Matrix& gamma);

/// GW distance to a one-point space: E_{mu x mu}[|X - X'|^4]^{1/2}.
double gw_to_point(const MMSpace& mu);
/// Same quantity straight from Euclidean points, without forming the cost
/// matrix. Large supports use the exact fourth-moment expansion of
/// sum_ik p_i p_k |x_i - x_k|^4, which is linear in the support size.
double gw_to_point(const DiscreteMeasure& mu);
/// Partial GW to a one-point space, minimizing over trimmed weights
/// 0 <= m <= p with sum(m) = 1 - eps. Oracle-grade; support size <= 12.
double pgw_to_point(const MMSpace& mu, double eps);

inline constexpr std::size_t kPgwToPointMaxSupport = 12;

}  // namespace rgw
