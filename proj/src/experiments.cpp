#include "rgw/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <optional>
#include <thread>
#include <tuple>

#include "rgw/errors.hpp"
#include "rgw/format.hpp"
#include "rgw/seeding.hpp"

namespace rgw {

namespace {

MMSpace empirical_space(const Matrix& samples) {
  return MMSpace(normalize(DiscreteMeasure::empirical(samples).merged()));
}

EstimatorSpec for_cell(EstimatorSpec spec, double eps, std::uint64_t seed, std::size_t index) {
  if (spec.kind == EstimatorKind::pgw) spec.trim = std::min(spec.trim_slack * eps, 1.0 - 1e-12);
  spec.solver.seed = derive_seed(seed, "estimator", index);
  return spec;
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Observation {
  MMSpace mu, nu;
  std::vector<double> clean_branches;  // candidate true GW values
};

Observation observe_population(const SweepConfig& cfg, double eps, std::uint64_t seed) {
  const FamilySpec& f = cfg.family;
  switch (cfg.adversary.kind) {
    case AttackKind::two_point: {
      const TwoPointPair tp = two_point_pair(f.sigma, f.k, eps, f.dim);
      return {MMSpace(tp.mu1), MMSpace(tp.point), {tp.gap, 0.0}};
    }
    case AttackKind::mirror_blend: {
      const CleanPair clean = separated_pair(f.dim, derive_seed(seed, "pair"));
      SolverConfig sc;
      sc.restarts *= cfg.clean_restart_factor;
      sc.seed = derive_seed(seed, "clean");
      const double gw = solve_gw(MMSpace(clean.mu), MMSpace(clean.nu), sc).value;
      const BlendedPair blended = mirror_blend(clean.mu, clean.nu, eps);
      return {MMSpace(blended.mu), MMSpace(blended.nu), {gw}};
    }
    case AttackKind::far_outlier: {
      const DiscreteMeasure mu = family_atomic_member(f);
      const double R = cfg.adversary.param("R", 1e3 * f.sigma);
      return {MMSpace(far_outlier(mu, eps, R, derive_seed(seed, "mu"))),
              MMSpace(far_outlier(mu, eps, R, derive_seed(seed, "nu"))),
              {0.0}};
    }
    case AttackKind::sample_replacement:
      break;
  }
  throw InputError("sweep: sample_replacement needs a finite-sample n grid");
}

Observation observe_samples(const SweepConfig& cfg, double eps, std::size_t n, std::uint64_t seed) {
  ContaminationSpec attack = cfg.adversary;
  attack.eps = eps;
  if (!attack.params.count("R")) attack.params["R"] = 1e3 * cfg.family.sigma;
  const Matrix x = sample_family(cfg.family, n, derive_seed(seed, "mu"));
  const Matrix y = sample_family(cfg.family, n, derive_seed(seed, "nu"));
  attack.seed = derive_seed(seed, "attack_mu");
  const CorruptedSamples cx = corrupt_samples(x, eps, attack);
  attack.seed = derive_seed(seed, "attack_nu");
  const CorruptedSamples cy = corrupt_samples(y, eps, attack);
  // Both sides are drawn from the same law, so the clean distance is zero.
  return {empirical_space(cx.points), empirical_space(cy.points), {0.0}};
}

std::vector<RiskRecord> run_cell(const SweepConfig& cfg, std::size_t ei, std::size_t ni, int trial) {
  const double eps = cfg.eps_grid[ei];
  const std::size_t n = cfg.population_limit() ? 0 : cfg.n_grid[ni];
  const std::uint64_t seed = trial_seed(cfg.master_seed, ei, ni, trial);
  const std::size_t n_count = std::max<std::size_t>(1, cfg.n_grid.size());
  const std::size_t base =
      ((ei * n_count + ni) * static_cast<std::size_t>(cfg.trials) + static_cast<std::size_t>(trial)) *
      cfg.estimators.size();

  std::vector<RiskRecord> out;
  RiskRecord proto;
  proto.family = to_string(cfg.family.family);
  proto.k = cfg.family.k;
  proto.sigma = cfg.family.sigma;
  proto.eps = eps;
  proto.n = n;
  proto.trial = trial;
  proto.seed = seed;

  std::optional<Observation> obs;
  std::string setup_error;
  try {
    obs = cfg.population_limit() ? observe_population(cfg, eps, seed) : observe_samples(cfg, eps, n, seed);
  } catch (const std::exception& e) {
    setup_error = e.what();
  }

  for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
    RiskRecord r = proto;
    r.estimator_kind = to_string(cfg.estimators[e].kind);
    r.cell_order = base + e;
    if (!obs) {
      r.error = setup_error;
    } else {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const Estimate est = estimate(for_cell(cfg.estimators[e], eps, seed, e), obs->mu, obs->nu);
        r.estimate = est.value;
        r.fw_gap = est.fw_gap;
        // Construction risk: the consistent clean value farthest from the estimate.
        r.clean_gw = obs->clean_branches.front();
        for (double c : obs->clean_branches) {
          if (std::abs(est.value - c) > std::abs(est.value - r.clean_gw)) r.clean_gw = c;
        }
        r.abs_error = std::abs(r.estimate - r.clean_gw);
      } catch (const std::exception& ex) {
        r.error = ex.what();
      }
      if (cfg.record_wall_time) r.wall_time_s = elapsed_since(t0);
    }
    if (!r.error.empty()) {
      r.estimate = r.clean_gw = r.abs_error = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(std::move(r));
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

void SweepConfig::validate() const {
  family.validate();
  adversary.validate();
  if (estimators.empty()) throw InputError("sweep: at least one estimator is required");
  for (const EstimatorSpec& e : estimators) e.validate();
  if (eps_grid.empty()) throw InputError("sweep: eps_grid must not be empty");
  for (double eps : eps_grid) {
    if (!(eps >= 0.0 && eps <= 0.49)) throw InputError("sweep: eps_grid values must lie in [0, 0.49]");
    if (population_limit() && adversary.kind == AttackKind::two_point && eps == 0.0) {
      throw InputError("sweep: the two-point construction needs eps > 0");
    }
    for (const EstimatorSpec& e : estimators) {
      if (e.kind == EstimatorKind::pgw && !e.allow_breakdown && e.trim_slack * eps >= 1.0 / 3.0) {
        throw InputError("sweep: pgw trim reaches 1/3; set allow_breakdown to run the breakdown regime");
      }
    }
  }
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1) throw InputError("sweep: n_grid values must be positive");
  }
  if (trials < 1) throw InputError("sweep: trials must be at least 1");
  if (clean_restart_factor < 1) throw InputError("sweep: clean_restart_factor must be at least 1");
  if (population_limit()) {
    if (adversary.kind == AttackKind::sample_replacement) {
      throw InputError("sweep: sample_replacement needs a finite-sample n grid");
    }
    if (adversary.kind == AttackKind::far_outlier &&
        (family.family != FamilyKind::bounded_moment_k || family.member != "two_atom")) {
      throw InputError("sweep: population far_outlier needs the two_atom member");
    }
  } else {
    if (adversary.kind == AttackKind::mirror_blend) {
      throw InputError("sweep: mirror_blend is a population-limit construction");
    }
    if (adversary.kind == AttackKind::two_point && !adversary.params.count("a")) {
      throw InputError("sweep: two_point sample corruption needs params.a");
    }
  }
}

nlohmann::json to_json(const SweepConfig& cfg) {
  nlohmann::json estimators = nlohmann::json::array();
  for (const EstimatorSpec& e : cfg.estimators) estimators.push_back(to_json(e));
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [key, value] : cfg.adversary.params) params[key] = value;
  return {{"family", to_json(cfg.family)},
          {"adversary", {{"kind", to_string(cfg.adversary.kind)}, {"params", params}}},
          {"estimators", estimators},
          {"sweep",
           {{"eps_grid", cfg.eps_grid},
            {"n_grid", cfg.n_grid},
            {"trials", cfg.trials},
            {"clean_restart_factor", cfg.clean_restart_factor},
            {"record_wall_time", cfg.record_wall_time}}},
          {"seed", cfg.master_seed}};
}

nlohmann::json to_json(const SlopeFit& fit) {
  return {{"exponent", fit.exponent},
          {"intercept", fit.intercept},
          {"r_squared", fit.r_squared},
          {"eps_range", {fit.eps_range.first, fit.eps_range.second}}};
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t eps_index, std::size_t n_index, int trial) {
  std::uint64_t s = derive_seed(master_seed, "eps", eps_index);
  s = derive_seed(s, "n", n_index);
  return derive_seed(s, "trial", static_cast<std::uint64_t>(trial));
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs < 1) throw InputError("parallel_for: jobs must be positive");
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_lock;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> guard(error_lock);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<RiskRecord> run_sweep(const SweepConfig& config, const SweepOptions& options) {
  config.validate();
  struct Item {
    std::size_t ei, ni;
    int trial;
  };
  std::vector<Item> items;
  const std::size_t n_count = std::max<std::size_t>(1, config.n_grid.size());
  for (std::size_t ei = 0; ei < config.eps_grid.size(); ++ei) {
    for (std::size_t ni = 0; ni < n_count; ++ni) {
      for (int t = 0; t < config.trials; ++t) items.push_back({ei, ni, t});
    }
  }
  std::vector<RiskRecord> records;
  std::mutex lock;
  parallel_for(items.size(), options.jobs, [&](std::size_t i) {
    std::vector<RiskRecord> cell = run_cell(config, items[i].ei, items[i].ni, items[i].trial);
    std::lock_guard<std::mutex> guard(lock);
    if (options.on_trial) options.on_trial(cell);
    records.insert(records.end(), cell.begin(), cell.end());
  });
  std::stable_sort(records.begin(), records.end(),
                   [](const RiskRecord& a, const RiskRecord& b) { return a.cell_order < b.cell_order; });
  return records;
}

CleanPair separated_pair(std::size_t dim, std::uint64_t seed, double min_gw) {
  if (dim < 1) throw InputError("separated_pair: dim must be at least 1");
  auto draw = [dim](Rng& rng, double spread) {
    std::normal_distribution<double> normal(0.0, spread);
    std::uniform_real_distribution<double> uniform(0.2, 1.0);
    Matrix pts(3, static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = normal(rng);
    std::vector<double> w{uniform(rng), uniform(rng), uniform(rng)};
    return normalize(DiscreteMeasure(pts, w));
  };
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    Rng rng = make_rng(derive_seed(seed, "attempt", attempt));
    CleanPair out{draw(rng, 1.0), draw(rng, 2.5), 0.0};
    out.certified_lower = std::abs(gw_to_point(out.mu) - gw_to_point(out.nu));
    if (out.certified_lower > min_gw) return out;
  }
  throw NumericalError("separated_pair: no certified pair found");
}

SlopeFit fit_exponent(const std::vector<RiskRecord>& records, const std::string& estimator_kind) {
  std::map<double, std::vector<double>> by_eps;
  for (const RiskRecord& r : records) {
    if (r.estimator_kind == estimator_kind && r.error.empty()) by_eps[r.eps].push_back(r.abs_error);
  }
  std::vector<double> xs, ys;
  for (const auto& [eps, errs] : by_eps) {
    const double m = mean_of(errs);
    if (!(eps > 0.0) || !(m > 0.0)) throw InputError("fit_exponent: eps values and mean errors must be positive");
    xs.push_back(std::log(eps));
    ys.push_back(std::log(m));
  }
  if (xs.size() < 3) throw InputError("fit_exponent: need at least 3 distinct eps values");
  const double mx = mean_of(xs), my = mean_of(ys);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  SlopeFit fit;
  fit.exponent = sxy / sxx;
  fit.intercept = my - fit.exponent * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (fit.intercept + fit.exponent * xs[i]);
    ss_res += e * e;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  fit.eps_range = {by_eps.begin()->first, by_eps.rbegin()->first};
  return fit;
}

std::vector<RiskRecord> convergence_study(const FamilySpec& family, const std::vector<std::size_t>& n_grid,
                                          int trials, std::uint64_t seed, int jobs) {
  family.validate();
  if (trials < 1) throw InputError("convergence_study: trials must be at least 1");
  if (n_grid.empty()) throw InputError("convergence_study: n_grid must not be empty");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1 || (i > 0 && n_grid[i] <= n_grid[i - 1])) {
      throw InputError("convergence_study: n_grid must be positive and increasing");
    }
  }
  const double truth = family_gw_to_point(family);
  const auto t_count = static_cast<std::size_t>(trials);
  std::vector<RiskRecord> records(n_grid.size() * t_count);
  parallel_for(records.size(), jobs, [&](std::size_t idx) {
    const std::size_t ni = idx / t_count;
    const int t = static_cast<int>(idx % t_count);
    RiskRecord& r = records[idx];
    r.family = to_string(family.family);
    r.k = family.k;
    r.sigma = family.sigma;
    r.n = n_grid[ni];
    r.trial = t;
    r.estimator_kind = "plugin_gw";
    r.seed = trial_seed(seed, 0, ni, t);
    r.cell_order = idx;
    r.estimate = gw_to_point(DiscreteMeasure::empirical(sample_family(family, r.n, r.seed)));
    r.clean_gw = truth;
    r.abs_error = std::abs(r.estimate - truth);
  });
  return records;
}

std::vector<CellSummary> summarize(const std::vector<RiskRecord>& records) {
  std::map<std::tuple<std::string, double, std::size_t>, std::size_t> index;
  std::vector<std::vector<const RiskRecord*>> groups;
  for (const RiskRecord& r : records) {
    const auto [it, inserted] = index.emplace(std::make_tuple(r.estimator_kind, r.eps, r.n), groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(&r);
  }
  std::vector<CellSummary> out;
  for (const auto& members : groups) {
    CellSummary s;
    s.estimator_kind = members.front()->estimator_kind;
    s.eps = members.front()->eps;
    s.n = members.front()->n;
    std::vector<double> errs, ests, cleans;
    for (const RiskRecord* r : members) {
      if (!r->error.empty()) {
        ++s.failures;
        continue;
      }
      errs.push_back(r->abs_error);
      ests.push_back(r->estimate);
      cleans.push_back(r->clean_gw);
      s.max_fw_gap = std::max(s.max_fw_gap, r->fw_gap);
    }
    s.count = errs.size();
    s.mean_abs_error = mean_of(errs);
    s.mean_estimate = mean_of(ests);
    s.mean_clean_gw = mean_of(cleans);
    if (errs.size() > 1) {
      double ss = 0.0;
      for (double e : errs) ss += (e - s.mean_abs_error) * (e - s.mean_abs_error);
      s.stderr_abs_error = std::sqrt(ss / static_cast<double>(errs.size() - 1) / static_cast<double>(errs.size()));
    }
    out.push_back(s);
  }
  return out;
}

nlohmann::json to_json(const PropertyCheck& c) {
  return {{"name", c.name},         {"hard", c.hard},           {"passed", c.passed},
          {"measured", c.measured}, {"threshold", c.threshold}, {"detail", c.detail}};
}

std::vector<PropertyCheck> sweep_checks(const SweepConfig& config, const std::vector<RiskRecord>& records) {
  std::vector<PropertyCheck> checks;
  double worst_consistency = 0.0;
  std::size_t failures = 0;
  for (const RiskRecord& r : records) {
    if (!r.error.empty()) {
      ++failures;
      continue;
    }
    worst_consistency = std::max(worst_consistency, std::abs(r.abs_error - std::abs(r.estimate - r.clean_gw)));
  }
  checks.push_back({"abs_error_consistency", true, worst_consistency <= 1e-12, worst_consistency, 1e-12, ""});
  checks.push_back({"trial_failures", false, failures == 0, static_cast<double>(failures), 0.0,
                    "solver or construction errors recorded per trial"});

  const bool two_point = config.population_limit() && config.adversary.kind == AttackKind::two_point;
  const bool blend = config.population_limit() && config.adversary.kind == AttackKind::mirror_blend;
  for (std::size_t e = 0; e < config.estimators.size(); ++e) {
    const EstimatorSpec& spec = config.estimators[e];
    if (spec.kind != EstimatorKind::pgw) continue;
    double worst = 0.0;
    bool any = false;
    std::size_t outside = 0, checked = 0;
    for (const RiskRecord& r : records) {
      if (r.cell_order % config.estimators.size() != e || !r.error.empty()) continue;
      const double trim = spec.trim_slack * r.eps;
      if (config.population_limit() && r.eps < 1.0 / 3.0) {
        const double rho = resilience_bound(config.family.sigma, config.family.k, std::min(3.0 * r.eps, 0.99));
        ++checked;
        outside += !sandwich_bound(r.clean_gw, r.estimate, {0.0, 0.0}, {rho, rho}, r.eps).contains(r.estimate, 1e-9);
      }
      if (two_point && trim >= r.eps) {
        const double gap = two_point_pair(config.family.sigma, config.family.k, r.eps, config.family.dim).gap;
        worst = std::max(worst, std::abs(r.abs_error - gap));
        any = true;
      } else if (blend && trim >= std::abs(1.0 - 2.0 * r.eps)) {
        worst = std::max(worst, r.estimate);
        any = true;
      }
    }
    if (checked > 0) {
      checks.push_back({"sandwich_envelope", false, outside == 0, static_cast<double>(outside) / checked, 0.0,
                        "fraction of pgw trials outside the sandwich interval with unit-constant resilience envelopes"});
    }
    if (any && two_point) {
      checks.push_back({"two_point_pgw_risk_equals_gap", true, worst <= 1e-6, worst, 1e-6, ""});
    } else if (any && blend) {
      checks.push_back({"breakdown_pgw_nullity", true, worst <= 1e-6, worst, 1e-6, ""});
    }
  }
  return checks;
}

nlohmann::json sweep_summary(const SweepConfig& config, const std::vector<RiskRecord>& records,
                             const std::vector<PropertyCheck>& checks) {
  nlohmann::json cells = nlohmann::json::array();
  for (const CellSummary& s : summarize(records)) {
    cells.push_back({{"estimator_kind", s.estimator_kind},
                     {"eps", s.eps},
                     {"n", s.n},
                     {"count", s.count},
                     {"failures", s.failures},
                     {"mean_abs_error", s.mean_abs_error},
                     {"stderr_abs_error", s.stderr_abs_error},
                     {"mean_estimate", s.mean_estimate},
                     {"mean_clean_gw", s.mean_clean_gw},
                     {"max_fw_gap", s.max_fw_gap}});
  }
  nlohmann::json fits = nlohmann::json::array();
  std::set<std::size_t> ns;
  for (const RiskRecord& r : records) ns.insert(r.n);
  for (const EstimatorSpec& e : config.estimators) {
    for (std::size_t n : ns) {
      std::vector<RiskRecord> subset;
      for (const RiskRecord& r : records) {
        if (r.n == n) subset.push_back(r);
      }
      try {
        const SlopeFit fit = fit_exponent(subset, to_string(e.kind));
        fits.push_back({{"estimator_kind", to_string(e.kind)}, {"n", n}, {"fit", to_json(fit)}});
      } catch (const InputError&) {
        // Too few usable eps values for this slice.
      }
    }
  }
  nlohmann::json check_list = nlohmann::json::array();
  for (const PropertyCheck& c : checks) check_list.push_back(to_json(c));
  return {{"risk", "construction risk (mean over explicit adversaries; a lower bound on worst-case risk)"},
          {"config", to_json(config)},
          {"cells", cells},
          {"slope_fits", fits},
          {"checks", check_list}};
}

bool MetricReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const PropertyCheck& c) { return c.passed || !c.hard; });
}

namespace {

DiscreteMeasure line_measure(std::vector<double> xs, std::vector<double> ws) {
  Matrix pts(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) pts(static_cast<Eigen::Index>(i), 0) = xs[i];
  return DiscreteMeasure(pts, std::move(ws));
}

DiscreteMeasure random_measure(Rng& rng, std::size_t atoms, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.1, 1.0);
  Matrix pts(static_cast<Eigen::Index>(atoms), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = normal(rng);
  std::vector<double> w(atoms);
  for (double& x : w) x = uniform(rng);
  return normalize(DiscreteMeasure(pts, w));
}

Matrix random_rotation(Rng& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
  return Eigen::HouseholderQR<Matrix>(g).householderQ();
}

}  // namespace

MetricReport metric_suite(std::uint64_t seed) {
  MetricReport report;
  auto add = [&report](std::string name, bool passed, double measured, double threshold, std::string detail = "") {
    report.checks.push_back({std::move(name), true, passed, measured, threshold, std::move(detail)});
  };

  {
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 5; ++i) {
      Rng rng = make_rng(derive_seed(seed, "symmetry", i));
      const MMSpace a(random_measure(rng, 3 + i % 2, 2));
      const MMSpace b(random_measure(rng, 4 - i % 2, 2));
      SolverConfig cfg;
      cfg.trim = 0.1;
      cfg.seed = derive_seed(seed, "symmetry_solver", i);
      worst = std::max(worst, std::abs(solve_pgw(a, b, cfg).value - solve_pgw(b, a, cfg).value));
    }
    add("symmetry", worst <= 1e-6, worst, 1e-6, "5 random pairs, trim 0.1");
  }

  {
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 3; ++i) {
      Rng rng = make_rng(derive_seed(seed, "isometry", i));
      const std::size_t dim = 1 + i;
      const DiscreteMeasure mu = random_measure(rng, 4 + i, dim);
      std::normal_distribution<double> normal(0.0, 1.0);
      Vector shift(static_cast<Eigen::Index>(dim));
      for (Eigen::Index j = 0; j < shift.size(); ++j) shift(j) = normal(rng);
      const double eps = 0.1;
      const DiscreteMeasure moved = apply_isometry(mu, random_rotation(rng, dim), shift);
      const DiscreteMeasure perturbed = far_outlier(moved, eps, 20.0, derive_seed(seed, "isometry_outlier", i));
      SolverConfig cfg;
      cfg.trim = eps;
      cfg.restarts = 40;
      cfg.seed = derive_seed(seed, "isometry_solver", i);
      worst = std::max(worst, solve_pgw(MMSpace(mu), MMSpace(perturbed), cfg).value);
    }
    add("isometry_nullity", worst <= 1e-6, worst, 1e-6, "3 random measures, rotation, shift and an outlier of mass 0.1");
  }

  {
    const DiscreteMeasure point = line_measure({0.0}, {1.0});
    const std::vector<DiscreteMeasure> mus{line_measure({0.0, 2.0}, {0.9, 0.1}), line_measure({0.0, 1.0}, {0.5, 0.5})};
    const std::vector<DiscreteMeasure> kappas{point, line_measure({0.0, 1.5}, {0.7, 0.3})};
    const std::vector<DiscreteMeasure> nus{point, line_measure({0.0, 1.0}, {0.9, 0.1})};
    double worst_slack = std::numeric_limits<double>::infinity();
    for (const auto& mu : mus) {
      for (const auto& kappa : kappas) {
        for (const auto& nu : nus) {
          for (double e : {0.0, 0.05}) {
            for (double d : {0.0, 0.05}) {
              const double lhs = brute_force_gw(MMSpace(mu), MMSpace(nu), e + d, 40);
              const double rhs = brute_force_gw(MMSpace(mu), MMSpace(kappa), e, 40) +
                                 brute_force_gw(MMSpace(kappa), MMSpace(nu), d, 40);
              worst_slack = std::min(worst_slack, rhs - lhs);
            }
          }
        }
      }
    }
    add("approximate_triangle", worst_slack >= -1e-4, worst_slack, -1e-4,
        "GW^(e+d)(mu,nu) <= GW^e(mu,kappa) + GW^d(kappa,nu) on small triples");
  }

  {
    const double eps = 0.1;
    const MMSpace mu(line_measure({0.0}, {1.0}));
    const MMSpace nu(line_measure({0.0, 1.0}, {0.9, 0.1}));
    const MMSpace kappa(line_measure({0.0, 1.0, 2.0}, {0.8, 0.1, 0.1}));
    SolverConfig cfg;
    cfg.trim = eps;
    cfg.restarts = 20;
    cfg.seed = derive_seed(seed, "counterexample");
    const double mn = solve_pgw(mu, nu, cfg).value;
    const double nk = solve_pgw(nu, kappa, cfg).value;
    const double mk = solve_pgw(mu, kappa, cfg).value;
    const double oracle = pgw_to_point(kappa, eps);
    add("counterexample_mu_nu", mn <= 1e-6, mn, 1e-6);
    add("counterexample_nu_kappa", nk <= 1e-6, nk, 1e-6);
    add("counterexample_mu_kappa", mk >= 0.4 - 1e-3 && std::abs(mk - oracle) <= 1e-3, mk, 0.4 - 1e-3,
        "oracle " + shortest_repr(oracle));
  }
  return report;
}

std::string record_csv_line(const RiskRecord& r) {
  std::string s;
  s += r.family + ',' + shortest_repr(r.k) + ',' + shortest_repr(r.sigma) + ',' + shortest_repr(r.eps) + ',';
  s += std::to_string(r.n) + ',' + std::to_string(r.trial) + ',' + r.estimator_kind + ',';
  s += shortest_repr(r.estimate) + ',' + shortest_repr(r.clean_gw) + ',' + shortest_repr(r.abs_error) + ',';
  s += shortest_repr(r.wall_time_s) + ',' + std::to_string(r.seed);
  return s;
}

void write_records_csv(const std::vector<RiskRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << kRecordCsvHeader << '\n';
  for (const RiskRecord& r : records) out << record_csv_line(r) << '\n';
  if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace rgw
