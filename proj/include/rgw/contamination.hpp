#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgw/measures.hpp"

namespace rgw {

enum class AttackKind { two_point, far_outlier, mirror_blend, sample_replacement };
enum class FamilyKind { bounded_moment_k, sub_gaussian, sliced_moment_k };

std::string to_string(AttackKind kind);
std::string to_string(FamilyKind kind);
AttackKind parse_attack_kind(const std::string& name);
FamilyKind parse_family_kind(const std::string& name);

struct ContaminationSpec {
  double eps = 0.0;
  AttackKind kind = AttackKind::far_outlier;
  // Recognized keys: "R" (relocation distance), "a" (atom location).
  std::map<std::string, double> params;
  std::uint64_t seed = 0;

  double param(const std::string& key, double fallback) const;
  void validate() const;
};

/// A distribution family together with the member that samplers draw from.
///
/// bounded_moment_k members:
///   two_atom  (1 - mass) delta_0 + mass delta_{a e1}, a = sigma * mass^(-1/k)
///   pareto    X = R U with U uniform on the sphere and R Pareto with index
///             alpha = k + 1/2 and scale sigma * ((alpha - k) / alpha)^(1/k),
///             so E|X|^k = sigma^k and E|X|^(k + 1/2) = inf
/// sub_gaussian: N(0, s^2 I) with s = sigma * sqrt(3/8), for which
///   E exp(<theta, X>^2 / sigma^2) = 2 exactly.
/// sliced_moment_k: (1 - mass) delta_0 + mass N(0, c^2 I) with
///   c = mass^(-1/k) sigma / sqrt(k).
struct FamilySpec {
  FamilyKind family = FamilyKind::bounded_moment_k;
  double sigma = 1.0;
  double k = 8.0;
  std::size_t dim = 1;
  std::string member = "two_atom";
  double mass = 0.1;

  void validate() const;
};

nlohmann::json to_json(const ContaminationSpec& spec);
nlohmann::json to_json(const FamilySpec& spec);
/// Missing keys take their defaults; unknown keys throw InputError.
ContaminationSpec contamination_from_json(const nlohmann::json& j, const std::string& path = "adversary");
FamilySpec family_from_json(const nlohmann::json& j, const std::string& path = "family");

struct TwoPointPair {
  DiscreteMeasure mu1;    // (1 - eps) delta_0 + eps delta_a
  DiscreteMeasure point;  // delta_0
  double a = 0.0;
  double gap = 0.0;  // sqrt(2 (1 - eps)) sigma^2 eps^(1/2 - 2/k)
  // Both clean pairs (mu1, delta_0) and (delta_0, delta_0) are consistent with
  // the observation (mu1, delta_0).
  DiscreteMeasure observed_mu() const { return mu1; }
  DiscreteMeasure observed_nu() const { return point; }
};

TwoPointPair two_point_pair(double sigma, double k, double eps, std::size_t dim = 1);

struct BlendedPair {
  DiscreteMeasure mu;
  DiscreteMeasure nu;
};

/// (1 - eps) mu + eps nu and (1 - eps) nu + eps mu, duplicates merged.
BlendedPair mirror_blend(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double eps);

/// Unit vector drawn uniformly from the sphere in R^dim.
Eigen::RowVectorXd random_direction(std::size_t dim, std::uint64_t seed);

/// (1 - eps) mu plus an atom of mass eps at R u, u = random_direction(seed).
DiscreteMeasure far_outlier(const DiscreteMeasure& mu, double eps, double R, std::uint64_t direction_seed);

struct CorruptedSamples {
  Matrix points;
  std::vector<std::size_t> modified;  // sorted row indices
};

/// Number of replaced samples, ceil(eps n) with products like 0.05 * 100
/// rounded to the nearest integer first.
std::size_t corruption_count(double eps, std::size_t n);

/// Replaces exactly corruption_count(eps, n) rows chosen from attack.seed.
/// far_outlier and sample_replacement move them to R u (R defaults to 1e3);
/// two_point moves them to a e1 (param "a" required).
CorruptedSamples corrupt_samples(const Matrix& samples, double eps, const ContaminationSpec& attack);

/// n i.i.d. draws (rows) from the designated member of the family.
Matrix sample_family(const FamilySpec& spec, std::size_t n, std::uint64_t seed);

/// Exact E|X|^k of the designated member (for sliced_moment_k, the sliced
/// moment E|<X, e1>|^k, which needs even k).
double family_moment(const FamilySpec& spec);
/// Exact GW distance between the designated member and a point mass.
double family_gw_to_point(const FamilySpec& spec);
/// The member as a discrete measure, when it is one (two_atom only).
DiscreteMeasure family_atomic_member(const FamilySpec& spec);

}  // namespace rgw
