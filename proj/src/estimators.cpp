#include "rgw/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rgw/errors.hpp"
#include "rgw/json_util.hpp"
#include "rgw/seeding.hpp"

namespace rgw {

namespace {

constexpr int kScoreRestarts = 3;

}  // namespace

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::pgw: return "pgw";
    case EstimatorKind::plugin_gw: return "plugin_gw";
    case EstimatorKind::tv_projection: return "tv_projection";
  }
  return "";
}

EstimatorKind parse_estimator_kind(const std::string& name) {
  for (EstimatorKind k : {EstimatorKind::pgw, EstimatorKind::plugin_gw, EstimatorKind::tv_projection}) {
    if (to_string(k) == name) return k;
  }
  throw InputError("unknown estimator kind \"" + name + "\"");
}

void EstimatorSpec::validate() const {
  solver.validate();
  if (kind == EstimatorKind::pgw) {
    const double limit = allow_breakdown ? 1.0 : 1.0 / 3.0;
    if (!(trim >= 0.0 && trim < limit)) {
      throw InputError(allow_breakdown ? "estimator: trim must lie in [0, 1)"
                                       : "estimator: trim must lie in [0, 1/3) unless allow_breakdown is set");
    }
  }
  if (kind == EstimatorKind::tv_projection && !(radius > 0.0)) {
    throw InputError("estimator: radius must be positive");
  }
  if (!(trim_slack > 0.0)) throw InputError("estimator: trim_slack must be positive");
}

nlohmann::json to_json(const SolverConfig& cfg) {
  return {{"restarts", cfg.restarts},       {"max_iters", cfg.max_iters},
          {"fw_gap_tol", cfg.fw_gap_tol},   {"obj_rel_tol", cfg.obj_rel_tol},
          {"seed", cfg.seed},               {"dummy_penalty_margin", cfg.dummy_penalty_margin},
          {"profile_start", cfg.profile_start}};
}

nlohmann::json to_json(const EstimatorSpec& spec) {
  return {{"kind", to_string(spec.kind)},       {"trim", spec.trim},
          {"radius", spec.radius},              {"trim_slack", spec.trim_slack},
          {"allow_breakdown", spec.allow_breakdown}, {"solver", to_json(spec.solver)}};
}

SolverConfig solver_from_json(const nlohmann::json& j, const std::string& where, const SolverConfig& defaults) {
  reject_unknown_keys(j, {"restarts", "max_iters", "fw_gap_tol", "obj_rel_tol", "seed", "dummy_penalty_margin", "profile_start"},
                      where);
  SolverConfig cfg = defaults;
  cfg.restarts = get_or(j, "restarts", cfg.restarts, where);
  cfg.max_iters = get_or(j, "max_iters", cfg.max_iters, where);
  cfg.fw_gap_tol = get_or(j, "fw_gap_tol", cfg.fw_gap_tol, where);
  cfg.obj_rel_tol = get_or(j, "obj_rel_tol", cfg.obj_rel_tol, where);
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed, where);
  cfg.dummy_penalty_margin = get_or(j, "dummy_penalty_margin", cfg.dummy_penalty_margin, where);
  cfg.profile_start = get_or(j, "profile_start", cfg.profile_start, where);
  try {
    cfg.validate();
  } catch (const InputError& e) {
    throw ConfigError(where, bare_message(e));
  }
  return cfg;
}

EstimatorSpec estimator_from_json(const nlohmann::json& j, const std::string& where, const SolverConfig& defaults) {
  reject_unknown_keys(j, {"kind", "trim", "radius", "trim_slack", "allow_breakdown", "solver"}, where);
  EstimatorSpec spec;
  try {
    spec.kind = parse_estimator_kind(get_or<std::string>(j, "kind", to_string(spec.kind), where));
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    throw ConfigError(join_path(where, "kind"), bare_message(e));
  }
  spec.trim = get_or(j, "trim", spec.trim, where);
  spec.radius = get_or(j, "radius", spec.radius, where);
  spec.trim_slack = get_or(j, "trim_slack", spec.trim_slack, where);
  spec.allow_breakdown = get_or(j, "allow_breakdown", spec.allow_breakdown, where);
  spec.solver = j.contains("solver") ? solver_from_json(j["solver"], join_path(where, "solver"), defaults) : defaults;
  try {
    spec.validate();
  } catch (const InputError& e) {
    throw ConfigError(where, bare_message(e));
  }
  return spec;
}

Eigen::RowVectorXd weighted_median(const DiscreteMeasure& m) {
  if (m.empty() || !(m.total_mass() > 0.0)) throw InputError("weighted_median: empty measure");
  const double half = 0.5 * m.total_mass();
  Eigen::RowVectorXd out(static_cast<Eigen::Index>(m.dim()));
  std::vector<std::size_t> order(m.size());
  for (Eigen::Index c = 0; c < out.size(); ++c) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return m.points()(static_cast<Eigen::Index>(a), c) < m.points()(static_cast<Eigen::Index>(b), c);
    });
    double acc = 0.0;
    for (std::size_t i : order) {
      acc += m.weight(i);
      if (acc >= half) {
        out(c) = m.points()(static_cast<Eigen::Index>(i), c);
        break;
      }
    }
  }
  return out;
}

Projection project_bounded_support(const DiscreteMeasure& m, double radius) {
  if (!(radius > 0.0)) throw InputError("project_bounded_support: radius must be positive");
  const Eigen::RowVectorXd center = weighted_median(m);
  Matrix kept(0, static_cast<Eigen::Index>(m.dim()));
  std::vector<double> weights;
  std::vector<Eigen::Index> rows;
  double removed = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if ((m.point(i) - center).norm() <= radius) {
      rows.push_back(static_cast<Eigen::Index>(i));
      weights.push_back(m.weight(i));
    } else {
      removed += m.weight(i);
    }
  }
  if (weights.empty()) throw InputError("project_bounded_support: no mass within the radius");
  kept.resize(static_cast<Eigen::Index>(rows.size()), kept.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) kept.row(static_cast<Eigen::Index>(r)) = m.points().row(rows[r]);
  return {normalize(DiscreteMeasure(kept, weights)), removed};
}

Estimate estimate(const EstimatorSpec& spec, const MMSpace& mu_obs, const MMSpace& nu_obs) {
  spec.validate();
  if (!mu_obs.measure().is_probability() || !nu_obs.measure().is_probability()) {
    throw InputError("estimate: observations must be probability measures");
  }
  SolveReport r;
  switch (spec.kind) {
    case EstimatorKind::pgw: {
      SolverConfig cfg = spec.solver;
      cfg.trim = spec.trim;
      r = solve_pgw(mu_obs, nu_obs, cfg);
      break;
    }
    case EstimatorKind::plugin_gw:
      r = solve_gw(mu_obs, nu_obs, spec.solver);
      break;
    case EstimatorKind::tv_projection: {
      const MMSpace a(project_bounded_support(mu_obs.measure(), spec.radius).measure);
      const MMSpace b(project_bounded_support(nu_obs.measure(), spec.radius).measure);
      r = solve_gw(a, b, spec.solver);
      break;
    }
  }
  return {r.value, r.fw_gap_final};
}

double resilience_bound(double sigma, double k, double eps) {
  if (!(k >= 4.0)) throw InputError("resilience_bound: k must be at least 4");
  if (!(sigma > 0.0)) throw InputError("resilience_bound: sigma must be positive");
  if (!(eps >= 0.0 && eps <= 0.99)) throw InputError("resilience_bound: eps must lie in [0, 0.99]");
  if (eps == 0.0) return 0.0;
  return sigma * sigma * std::pow(eps, 0.5 - 2.0 / k);
}

namespace {

Vector fill_in_order(const Vector& p, const std::vector<std::size_t>& order, double eps) {
  Vector w = Vector::Zero(p.size());
  double remaining = 1.0;
  for (std::size_t i : order) {
    if (remaining <= 0.0) break;
    const auto idx = static_cast<Eigen::Index>(i);
    w(idx) = std::min(p(idx) / (1.0 - eps), remaining);
    remaining -= w(idx);
  }
  // Rounding residue goes to the last filled atom.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto idx = static_cast<Eigen::Index>(*it);
    if (w(idx) > 0.0) {
      w(idx) += 1.0 - w.sum();
      break;
    }
  }
  return w;
}

void check_query(const ResilienceQuery& q) {
  if (!(q.eps >= 0.0 && q.eps < 1.0)) throw InputError("resilience_search: eps must lie in [0, 1)");
  if (q.measure.size() > 30) throw InputError("resilience_search: support size must be at most 30");
  if (q.measure.size() == 0) throw InputError("resilience_search: empty measure");
  if (!q.measure.measure().is_probability()) throw InputError("resilience_search: measure must be a probability");
}

}  // namespace

double resilience_score(const MMSpace& mu, const Vector& candidate, std::uint64_t seed) {
  const DiscreteMeasure cand =
      DiscreteMeasure(mu.measure().points(), std::vector<double>(candidate.data(), candidate.data() + candidate.size()))
          .without_null_atoms();
  SolverConfig cfg;
  cfg.restarts = kScoreRestarts;
  cfg.seed = derive_seed(seed, "score");
  return solve_gw(MMSpace(cand), mu, cfg).value;
}

ResilienceResult resilience_search_full(const ResilienceQuery& query, int restarts, std::uint64_t seed) {
  check_query(query);
  if (restarts < 1) throw InputError("resilience_search: restarts must be positive");
  const MMSpace& mu = query.measure;
  const Vector p = mu.weights();
  ResilienceResult best{0.0, p};
  if (query.eps == 0.0) return best;

  const auto n = mu.size();
  const Eigen::RowVectorXd center = weighted_median(mu.measure());
  for (int r = 0; r < restarts; ++r) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (r == 0) {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return (mu.measure().point(a) - center).squaredNorm() < (mu.measure().point(b) - center).squaredNorm();
      });
    } else {
      Rng rng = make_rng(derive_seed(seed, "resilience", static_cast<std::uint64_t>(r)));
      std::shuffle(order.begin(), order.end(), rng);
    }
    Vector w = fill_in_order(p, order, query.eps);
    double score = resilience_score(mu, w, seed);
    for (std::size_t t = 0; t + 1 < n; ++t) {
      std::swap(order[t], order[t + 1]);
      const Vector w2 = fill_in_order(p, order, query.eps);
      if ((w2 - w).cwiseAbs().maxCoeff() == 0.0) continue;
      const double s2 = resilience_score(mu, w2, seed);
      if (s2 > score) {
        score = s2;
        w = w2;
      } else {
        std::swap(order[t], order[t + 1]);
      }
    }
    if (score > best.value) best = {score, w};
  }
  return best;
}

double resilience_search(const ResilienceQuery& query, int restarts, std::uint64_t seed) {
  return resilience_search_full(query, restarts, seed).value;
}

std::vector<double> resilience_profile(const MMSpace& measure, const std::vector<double>& eps_grid, int restarts,
                                       std::uint64_t seed) {
  if (!std::is_sorted(eps_grid.begin(), eps_grid.end())) {
    throw InputError("resilience_profile: eps grid must be increasing");
  }
  std::vector<double> out;
  double carried = 0.0;
  for (double eps : eps_grid) {
    const ResilienceResult r = resilience_search_full({measure, eps}, restarts, seed);
    // Earlier candidates stay feasible as eps grows and keep their score.
    carried = std::max(carried, r.value);
    out.push_back(carried);
  }
  return out;
}

Interval sandwich_bound(double gw_clean, double pgw_observed, std::pair<double, double> sampling_errs,
                        std::pair<double, double> resiliences, double eps) {
  if (!(eps >= 0.0 && eps < 1.0 / 3.0)) throw InputError("sandwich_bound: eps must lie in [0, 1/3)");
  for (double x : {gw_clean, pgw_observed, sampling_errs.first, sampling_errs.second, resiliences.first,
                   resiliences.second}) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InputError("sandwich_bound: inputs must be finite and nonnegative");
  }
  const double slack = sampling_errs.first + sampling_errs.second + resiliences.first + resiliences.second +
                       3.0 * eps * gw_clean;
  return {std::max(0.0, gw_clean - slack), gw_clean + slack};
}

}  // namespace rgw
