#include "rgw/contamination.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "rgw/errors.hpp"
#include "rgw/json_util.hpp"
#include "rgw/seeding.hpp"

namespace rgw {

namespace {

double odd_double_factorial(double k) {
  double r = 1.0;
  for (double f = k - 1.0; f > 1.0; f -= 2.0) r *= f;
  return r;
}

double pareto_alpha(const FamilySpec& s) { return s.k + 0.5; }

double pareto_scale(const FamilySpec& s) {
  const double alpha = pareto_alpha(s);
  return s.sigma * std::pow((alpha - s.k) / alpha, 1.0 / s.k);
}

double pareto_radial_moment(const FamilySpec& s, double j) {
  const double alpha = pareto_alpha(s);
  if (j >= alpha) return std::numeric_limits<double>::infinity();
  return alpha * std::pow(pareto_scale(s), j) / (alpha - j);
}

double two_atom_location(const FamilySpec& s) { return s.sigma * std::pow(s.mass, -1.0 / s.k); }
double sliced_scale(const FamilySpec& s) { return std::pow(s.mass, -1.0 / s.k) * s.sigma / std::sqrt(s.k); }
double sub_gaussian_scale(const FamilySpec& s) { return s.sigma * std::sqrt(3.0 / 8.0); }

}  // namespace

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::two_point: return "two_point";
    case AttackKind::far_outlier: return "far_outlier";
    case AttackKind::mirror_blend: return "mirror_blend";
    case AttackKind::sample_replacement: return "sample_replacement";
  }
  return "";
}

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::bounded_moment_k: return "bounded_moment_k";
    case FamilyKind::sub_gaussian: return "sub_gaussian";
    case FamilyKind::sliced_moment_k: return "sliced_moment_k";
  }
  return "";
}

AttackKind parse_attack_kind(const std::string& name) {
  for (AttackKind k : {AttackKind::two_point, AttackKind::far_outlier, AttackKind::mirror_blend,
                       AttackKind::sample_replacement}) {
    if (to_string(k) == name) return k;
  }
  throw InputError("unknown contamination kind \"" + name + "\"");
}

FamilyKind parse_family_kind(const std::string& name) {
  for (FamilyKind k : {FamilyKind::bounded_moment_k, FamilyKind::sub_gaussian, FamilyKind::sliced_moment_k}) {
    if (to_string(k) == name) return k;
  }
  throw InputError("unknown family \"" + name + "\"");
}

double ContaminationSpec::param(const std::string& key, double fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void ContaminationSpec::validate() const {
  if (!(eps >= 0.0 && eps <= 1.0)) throw InputError("contamination: eps must lie in [0, 1]");
  for (const auto& [key, value] : params) {
    if (key != "R" && key != "a") throw InputError("contamination: unknown parameter \"" + key + "\"");
    if (!std::isfinite(value)) throw InputError("contamination: parameter \"" + key + "\" is not finite");
  }
  if (param("R", 1.0) <= 0.0) throw InputError("contamination: R must be positive");
}

void FamilySpec::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("family: sigma must be positive");
  if (dim < 1) throw InputError("family: dim must be at least 1");
  if (family != FamilyKind::sub_gaussian && !(k >= 4.0)) throw InputError("family: k must be at least 4");
  if (family == FamilyKind::bounded_moment_k) {
    if (member != "two_atom" && member != "pareto") {
      throw InputError("family: bounded_moment_k member must be two_atom or pareto");
    }
  }
  if (!(mass > 0.0 && mass < 1.0)) throw InputError("family: mass must lie in (0, 1)");
}

nlohmann::json to_json(const ContaminationSpec& spec) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [key, value] : spec.params) params[key] = value;
  return {{"eps", spec.eps}, {"kind", to_string(spec.kind)}, {"params", params}, {"seed", spec.seed}};
}

nlohmann::json to_json(const FamilySpec& spec) {
  return {{"family", to_string(spec.family)}, {"sigma", spec.sigma}, {"k", spec.k},
          {"dim", spec.dim},                  {"member", spec.member}, {"mass", spec.mass}};
}

ContaminationSpec contamination_from_json(const nlohmann::json& j, const std::string& where) {
  reject_unknown_keys(j, {"eps", "kind", "params", "seed"}, where);
  ContaminationSpec spec;
  spec.eps = get_or(j, "eps", spec.eps, where);
  try {
    spec.kind = parse_attack_kind(get_or<std::string>(j, "kind", to_string(spec.kind), where));
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    throw ConfigError(join_path(where, "kind"), bare_message(e));
  }
  if (j.contains("params")) {
    const std::string ppath = join_path(where, "params");
    reject_unknown_keys(j["params"], {"R", "a"}, ppath);
    for (const auto& [key, value] : j["params"].items()) spec.params[key] = get_or(j["params"], key.c_str(), 0.0, ppath);
  }
  spec.seed = get_or<std::uint64_t>(j, "seed", spec.seed, where);
  try {
    spec.validate();
  } catch (const InputError& e) {
    throw ConfigError(where, bare_message(e));
  }
  return spec;
}

FamilySpec family_from_json(const nlohmann::json& j, const std::string& where) {
  reject_unknown_keys(j, {"family", "sigma", "k", "dim", "member", "mass"}, where);
  FamilySpec spec;
  try {
    spec.family = parse_family_kind(get_or<std::string>(j, "family", to_string(spec.family), where));
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    throw ConfigError(join_path(where, "family"), bare_message(e));
  }
  spec.sigma = get_or(j, "sigma", spec.sigma, where);
  spec.k = get_or(j, "k", spec.k, where);
  spec.dim = get_or<std::size_t>(j, "dim", spec.dim, where);
  spec.member = get_or<std::string>(j, "member", spec.member, where);
  spec.mass = get_or(j, "mass", spec.mass, where);
  try {
    spec.validate();
  } catch (const InputError& e) {
    throw ConfigError(where, bare_message(e));
  }
  return spec;
}

TwoPointPair two_point_pair(double sigma, double k, double eps, std::size_t dim) {
  if (!(eps > 0.0 && eps < 1.0)) throw InputError("two_point_pair: eps must lie in (0, 1)");
  if (!(k >= 4.0)) throw InputError("two_point_pair: k must be at least 4");
  if (!(sigma > 0.0)) throw InputError("two_point_pair: sigma must be positive");
  if (dim < 1) throw InputError("two_point_pair: dim must be at least 1");
  TwoPointPair out;
  out.a = sigma * std::pow(eps, -1.0 / k);
  Matrix pts = Matrix::Zero(2, static_cast<Eigen::Index>(dim));
  pts(1, 0) = out.a;
  out.mu1 = DiscreteMeasure(pts, {1.0 - eps, eps});
  out.point = DiscreteMeasure::dirac(Vector::Zero(static_cast<Eigen::Index>(dim)));
  out.gap = std::sqrt(2.0 * (1.0 - eps)) * sigma * sigma * std::pow(eps, 0.5 - 2.0 / k);
  return out;
}

BlendedPair mirror_blend(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double eps) {
  if (mu.dim() != nu.dim()) throw InputError("mirror_blend: dimension mismatch");
  if (!mu.is_probability() || !nu.is_probability()) {
    throw InputError("mirror_blend: inputs must be probability measures");
  }
  if (!(eps >= 0.0 && eps <= 1.0)) throw InputError("mirror_blend: eps must lie in [0, 1]");
  if (eps == 0.0) return {mu, nu};
  BlendedPair out{(mu.scaled(1.0 - eps) + nu.scaled(eps)).merged().without_null_atoms(),
                  (nu.scaled(1.0 - eps) + mu.scaled(eps)).merged().without_null_atoms()};
  const double blended = tv_distance(out.mu, out.nu);
  const double expected = std::abs(1.0 - 2.0 * eps) * tv_distance(mu, nu);
  if (std::abs(blended - expected) > 1e-12 || tv_distance(out.mu, mu) > eps + 1e-12 ||
      tv_distance(out.nu, nu) > eps + 1e-12) {
    throw NumericalError("mirror_blend: TV budget violated");
  }
  return out;
}

Eigen::RowVectorXd random_direction(std::size_t dim, std::uint64_t seed) {
  if (dim < 1) throw InputError("random_direction: dim must be at least 1");
  Rng rng = make_rng(derive_seed(seed, "direction"));
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::RowVectorXd u(static_cast<Eigen::Index>(dim));
  do {
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = normal(rng);
  } while (u.norm() < 1e-12);
  return u / u.norm();
}

DiscreteMeasure far_outlier(const DiscreteMeasure& mu, double eps, double R, std::uint64_t direction_seed) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw InputError("far_outlier: eps must lie in [0, 1]");
  if (!(R > 0.0)) throw InputError("far_outlier: R must be positive");
  if (eps == 0.0) return mu;
  const DiscreteMeasure out = mu.scaled(1.0 - eps).with_atom(R * random_direction(mu.dim(), direction_seed), eps);
  if (tv_distance(out, mu) > eps * mu.total_mass() + 1e-12) throw NumericalError("far_outlier: TV budget violated");
  return out;
}

std::size_t corruption_count(double eps, std::size_t n) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw InputError("corruption_count: eps must lie in [0, 1]");
  const double x = eps * static_cast<double>(n);
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, x)) return static_cast<std::size_t>(nearest);
  return static_cast<std::size_t>(std::ceil(x));
}

CorruptedSamples corrupt_samples(const Matrix& samples, double eps, const ContaminationSpec& attack) {
  attack.validate();
  const auto n = static_cast<std::size_t>(samples.rows());
  if (n == 0) throw InputError("corrupt_samples: no samples");
  const std::size_t count = corruption_count(eps, n);
  CorruptedSamples out{samples, {}};
  if (count == 0) return out;

  Eigen::RowVectorXd target;
  switch (attack.kind) {
    case AttackKind::far_outlier:
    case AttackKind::sample_replacement:
      target = attack.param("R", 1e3) * random_direction(static_cast<std::size_t>(samples.cols()), attack.seed);
      break;
    case AttackKind::two_point:
      if (!attack.params.count("a")) throw InputError("corrupt_samples: two_point needs parameter \"a\"");
      target = Eigen::RowVectorXd::Zero(samples.cols());
      target(0) = attack.param("a", 0.0);
      break;
    case AttackKind::mirror_blend:
      throw InputError("corrupt_samples: mirror_blend acts on measure pairs, not samples");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(derive_seed(attack.seed, "indices"));
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  out.modified.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(out.modified.begin(), out.modified.end());
  for (std::size_t i : out.modified) out.points.row(static_cast<Eigen::Index>(i)) = target;

  const double tv = tv_distance(DiscreteMeasure::empirical(samples), DiscreteMeasure::empirical(out.points));
  if (tv > static_cast<double>(count) / static_cast<double>(n) + 1e-12) {
    throw NumericalError("corrupt_samples: TV budget violated");
  }
  return out;
}

Matrix sample_family(const FamilySpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n == 0) throw InputError("sample_family: n must be at least 1");
  const auto d = static_cast<Eigen::Index>(spec.dim);
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), d);
  Rng rng = make_rng(derive_seed(seed, "family"));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  auto gaussian_row = [&](double scale) {
    Eigen::RowVectorXd r(d);
    for (Eigen::Index j = 0; j < d; ++j) r(j) = scale * normal(rng);
    return r;
  };

  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    switch (spec.family) {
      case FamilyKind::bounded_moment_k:
        if (spec.member == "two_atom") {
          if (uniform(rng) < spec.mass) out(i, 0) = two_atom_location(spec);
        } else {
          Eigen::RowVectorXd u = gaussian_row(1.0);
          while (u.norm() < 1e-12) u = gaussian_row(1.0);
          // 1 - U lies in (0, 1], so the radius is finite.
          const double radius = pareto_scale(spec) * std::pow(1.0 - uniform(rng), -1.0 / pareto_alpha(spec));
          out.row(i) = radius * u / u.norm();
        }
        break;
      case FamilyKind::sub_gaussian:
        out.row(i) = gaussian_row(sub_gaussian_scale(spec));
        break;
      case FamilyKind::sliced_moment_k:
        if (uniform(rng) < spec.mass) out.row(i) = gaussian_row(sliced_scale(spec));
        break;
    }
  }
  return out;
}

double family_moment(const FamilySpec& spec) {
  spec.validate();
  switch (spec.family) {
    case FamilyKind::bounded_moment_k:
      if (spec.member == "two_atom") return spec.mass * std::pow(two_atom_location(spec), spec.k);
      return pareto_radial_moment(spec, spec.k);
    case FamilyKind::sub_gaussian: {
      // E|X|^k for X ~ N(0, s^2 I_d): s^k 2^(k/2) Gamma((d+k)/2) / Gamma(d/2).
      const double s = sub_gaussian_scale(spec);
      const double d = static_cast<double>(spec.dim);
      return std::pow(s, spec.k) * std::pow(2.0, spec.k / 2.0) *
             std::exp(std::lgamma((d + spec.k) / 2.0) - std::lgamma(d / 2.0));
    }
    case FamilyKind::sliced_moment_k: {
      if (std::fmod(spec.k, 2.0) != 0.0) throw InputError("family_moment: sliced moments need even k");
      return spec.mass * std::pow(sliced_scale(spec), spec.k) * odd_double_factorial(spec.k);
    }
  }
  return 0.0;
}

double family_gw_to_point(const FamilySpec& spec) {
  spec.validate();
  const double d = static_cast<double>(spec.dim);
  switch (spec.family) {
    case FamilyKind::bounded_moment_k: {
      if (spec.member == "two_atom") {
        const double a = two_atom_location(spec);
        return std::sqrt(2.0 * spec.mass * (1.0 - spec.mass)) * a * a;
      }
      // E|X - X'|^4 = 2 E R^4 + 2 (E R^2)^2 + 4 (E R^2)^2 / d for radial laws.
      const double r2 = pareto_radial_moment(spec, 2.0);
      return std::sqrt(2.0 * pareto_radial_moment(spec, 4.0) + 2.0 * r2 * r2 + 4.0 * r2 * r2 / d);
    }
    case FamilyKind::sub_gaussian: {
      const double s = sub_gaussian_scale(spec);
      return 2.0 * s * s * std::sqrt(d * (d + 2.0));
    }
    case FamilyKind::sliced_moment_k: {
      const double c = sliced_scale(spec);
      const double m = spec.mass;
      return c * c * std::sqrt(d * (d + 2.0) * (2.0 * m * (1.0 - m) + 4.0 * m * m));
    }
  }
  return 0.0;
}

DiscreteMeasure family_atomic_member(const FamilySpec& spec) {
  spec.validate();
  if (spec.family != FamilyKind::bounded_moment_k || spec.member != "two_atom") {
    throw InputError("family_atomic_member: only the two_atom member is atomic");
  }
  Matrix pts = Matrix::Zero(2, static_cast<Eigen::Index>(spec.dim));
  pts(1, 0) = two_atom_location(spec);
  return DiscreteMeasure(pts, {1.0 - spec.mass, spec.mass});
}

}  // namespace rgw
