#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rgw {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Finitely supported nonnegative measure on R^d.
///
/// Points are stored as the rows of an n x d matrix. Weights are kept as given
/// (not normalized); being a probability measure is a checked property.
/// Duplicate points are allowed and are only merged by `merged()` or by the
/// set-valued operations (tv_distance, measure_min).
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;
  explicit DiscreteMeasure(std::size_t dim);
  DiscreteMeasure(Matrix points, std::vector<double> weights);

  static DiscreteMeasure dirac(const Vector& at, double mass = 1.0);
  /// Uniform weights 1/n on each row of `samples`.
  static DiscreteMeasure empirical(Matrix samples);

  std::size_t size() const { return weights_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return weights_.empty(); }

  const Matrix& points() const { return points_; }
  Eigen::RowVectorXd point(std::size_t i) const { return points_.row(static_cast<Eigen::Index>(i)); }
  std::span<const double> weights() const { return weights_; }
  double weight(std::size_t i) const { return weights_[i]; }
  Vector weight_vector() const;

  double total_mass() const;
  bool is_probability() const;

  /// Same measure with duplicate points merged, in first-occurrence order.
  DiscreteMeasure merged() const;
  /// Drops atoms whose weight is exactly zero.
  DiscreteMeasure without_null_atoms() const;
  DiscreteMeasure scaled(double factor) const;
  DiscreteMeasure with_atom(const Eigen::RowVectorXd& at, double mass) const;

  /// Bitwise equality of points and weights (no merging).
  bool identical_to(const DiscreteMeasure& other) const;

 private:
  std::size_t dim_ = 0;
  Matrix points_;
  std::vector<double> weights_;
};

/// Sum of two measures on a common space (atoms concatenated, not merged).
DiscreteMeasure operator+(const DiscreteMeasure& a, const DiscreteMeasure& b);

/// Discrete measure together with the matrix of squared pairwise distances.
class MMSpace {
 public:
  MMSpace() = default;
  explicit MMSpace(DiscreteMeasure measure);
  /// Explicit cost matrix; must be symmetric, nonnegative, zero on the diagonal.
  MMSpace(DiscreteMeasure measure, Matrix cost);

  const DiscreteMeasure& measure() const { return measure_; }
  const Matrix& cost() const { return cost_; }
  Vector weights() const { return measure_.weight_vector(); }
  std::size_t size() const { return measure_.size(); }

 private:
  DiscreteMeasure measure_;
  Matrix cost_;
};

Matrix squared_distances(const Matrix& points);

double tv_distance(const DiscreteMeasure& a, const DiscreteMeasure& b);
DiscreteMeasure measure_min(const DiscreteMeasure& a, const DiscreteMeasure& b);
DiscreteMeasure normalize(const DiscreteMeasure& a);
/// Pushforward under x -> rotation * x + shift. `rotation` must be orthogonal.
DiscreteMeasure apply_isometry(const DiscreteMeasure& a, const Matrix& rotation,
                               const Vector& shift);

// File I/O. The format is chosen by extension: ".csv" selects CSV, anything
// else JSON. Malformed content throws InputError.
DiscreteMeasure read_measure(const std::filesystem::path& path);
void write_measure(const DiscreteMeasure& m, const std::filesystem::path& path);
DiscreteMeasure measure_from_json_text(const std::string& text);
std::string measure_to_json_text(const DiscreteMeasure& m);
DiscreteMeasure measure_from_csv_text(const std::string& text);
std::string measure_to_csv_text(const DiscreteMeasure& m);

}  // namespace rgw
