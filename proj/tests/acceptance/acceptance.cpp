// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "rgw/contamination.hpp"
#include "rgw/experiments.hpp"
#include "rgw/format.hpp"
#include "rgw/gw_objective.hpp"
#include "rgw/seeding.hpp"
#include "rgw/solvers.hpp"

namespace fs = std::filesystem;
using namespace rgw;

namespace {

fs::path g_work;

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct CliResult {
  int status = -1;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(RGW_CLI_PATH) + " " + args + " 2>&1";
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double x) {
  std::ostringstream ss;
  ss.precision(4);
  ss << x;
  return ss.str();
}

DiscreteMeasure random_measure(Rng& rng, std::size_t atoms, std::size_t dim, double spread = 1.0) {
  std::normal_distribution<double> normal(0.0, spread);
  std::uniform_real_distribution<double> uniform(0.1, 1.0);
  Matrix pts(static_cast<Eigen::Index>(atoms), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = normal(rng);
  std::vector<double> w(atoms);
  for (double& x : w) x = uniform(rng);
  return normalize(DiscreteMeasure(pts, w));
}

Matrix random_rotation(Rng& rng, std::size_t dim) {
  std::normal_distribution<double> normal;
  Matrix g(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ();
}

Vector random_shift(Rng& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 3.0);
  Vector s(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = normal(rng);
  return s;
}

double cli_value(const CliResult& r) {
  if (r.status != 0) return std::nan("");
  try {
    return nlohmann::json::parse(r.out).at("value").get<double>();
  } catch (const std::exception&) {
    return std::nan("");
  }
}

DiscreteMeasure point_line(std::initializer_list<std::pair<double, double>> atoms) {
  Matrix pts(static_cast<Eigen::Index>(atoms.size()), 1);
  std::vector<double> w;
  Eigen::Index i = 0;
  for (const auto& [x, m] : atoms) {
    pts(i++, 0) = x;
    w.push_back(m);
  }
  return DiscreteMeasure(pts, w);
}

std::vector<double> log_grid(double lo, double hi, int count) {
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
  return out;
}

SweepConfig two_point_sweep(double k, std::vector<double> eps_grid, std::uint64_t seed) {
  SweepConfig c;
  c.family.k = k;
  c.adversary.kind = AttackKind::two_point;
  EstimatorSpec pgw;
  pgw.kind = EstimatorKind::pgw;
  EstimatorSpec plugin;
  plugin.kind = EstimatorKind::plugin_gw;
  c.estimators = {pgw, plugin};
  c.eps_grid = std::move(eps_grid);
  c.master_seed = seed;
  return c;
}

// Criterion bodies.

Outcome nullity_isometry() {
  Rng rng(101);
  double worst = 0.0;
  int bad = 0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t atoms = 3 + static_cast<std::size_t>(t) % 13;
    const std::size_t dim = 1 + static_cast<std::size_t>(t) % 5;
    const double eps = t % 2 ? 0.1 : 0.05;
    const DiscreteMeasure mu = random_measure(rng, atoms, dim);
    const DiscreteMeasure moved = apply_isometry(mu, random_rotation(rng, dim), random_shift(rng, dim));
    const fs::path a = g_work / ("iso_mu_" + std::to_string(t) + ".json");
    const fs::path b = g_work / ("iso_moved_" + std::to_string(t) + ".json");
    const fs::path c = g_work / ("iso_pert_" + std::to_string(t) + ".json");
    write_measure(mu, a);
    write_measure(moved, b);
    const CliResult con = run_cli("contaminate " + q(b) + " --eps " + shortest_repr(eps) +
                                  " --kind far_outlier --R 50 --seed " + std::to_string(t) + " --out " + q(c));
    if (con.status != 0) return {false, "contaminate failed: " + con.out};
    const double v = cli_value(run_cli("pgw " + q(a) + " " + q(c) + " --eps " + shortest_repr(eps) +
                                       " --restarts 40 --seed " + std::to_string(t)));
    if (!(v <= 1e-6)) ++bad;
    worst = std::isnan(v) ? v : std::max(worst, v);
  }
  return {bad == 0, "max pgw " + fmt(worst) + ", " + std::to_string(bad) + "/20 above 1e-6"};
}

// Smallest PGW to a point over trimmed weights on a fine simplex grid.
double pgw_to_point_grid(const DiscreteMeasure& m, double eps, int steps) {
  const Matrix d2 = squared_distances(m.points());
  const auto p = m.weights();
  double best = std::numeric_limits<double>::infinity();
  const double keep = 1.0 - eps;
  for (int i = 0; i <= steps; ++i) {
    for (int j = 0; i + j <= steps; ++j) {
      const double w0 = keep * i / steps, w1 = keep * j / steps, w2 = keep - w0 - w1;
      if (w0 > p[0] + 1e-12 || w1 > p[1] + 1e-12 || w2 > p[2] + 1e-12 || w2 < -1e-12) continue;
      const std::array<double, 3> w{w0, w1, w2};
      double s = 0.0;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) s += w[a] * w[b] * d2(a, b) * d2(a, b);
      best = std::min(best, std::sqrt(s));
    }
  }
  return best;
}

Outcome counterexample_triple() {
  const MMSpace mu(point_line({{0.0, 1.0}}));
  const MMSpace nu(point_line({{0.0, 0.9}, {1.0, 0.1}}));
  const DiscreteMeasure kappa_m = point_line({{0.0, 0.8}, {1.0, 0.1}, {2.0, 0.1}});
  const MMSpace kappa(kappa_m);
  SolverConfig c;
  c.trim = 0.1;
  c.restarts = 20;
  const double mn = solve_pgw(mu, nu, c).value;
  const double nk = solve_pgw(nu, kappa, c).value;
  const double mk = solve_pgw(mu, kappa, c).value;
  const double oracle = pgw_to_point_grid(kappa_m, 0.1, 900);
  const bool ok = mn <= 1e-6 && nk <= 1e-6 && mk >= 0.399 && std::abs(mk - oracle) <= 1e-3 &&
                  std::abs(oracle - 0.4) <= 1e-9;
  return {ok, "values (" + fmt(mn) + ", " + fmt(nk) + ", " + shortest_repr(mk) + "), oracle " + shortest_repr(oracle)};
}

Outcome two_point_exactness() {
  double worst_pgw = 0.0, worst_plugin = 0.0, worst_risk = 0.0;
  const std::vector<double> grid{0.01, 0.02, 0.05, 0.1};
  for (double eps : grid) {
    const TwoPointPair pair = two_point_pair(1.0, 8.0, eps);
    const MMSpace mu1(pair.mu1), point(pair.point);
    SolverConfig c;
    c.trim = eps;
    worst_pgw = std::max(worst_pgw, solve_pgw(mu1, point, c).value);
    const double closed = std::sqrt(2.0 * (1.0 - eps)) * std::pow(eps, 0.25);
    c.trim = 0.0;
    worst_plugin = std::max(worst_plugin, std::abs(solve_gw(mu1, point, c).value - closed));
  }
  const SweepConfig sweep = two_point_sweep(8.0, grid, 3);
  for (const RiskRecord& r : run_sweep(sweep)) {
    if (r.estimator_kind != "pgw") continue;
    const double gap = std::sqrt(2.0 * (1.0 - r.eps)) * std::pow(r.eps, 0.25);
    worst_risk = std::max(worst_risk, std::abs(r.abs_error - gap));
  }
  const bool ok = worst_pgw <= 1e-6 && worst_plugin <= 1e-6 && worst_risk <= 1e-6;
  return {ok, "max pgw " + fmt(worst_pgw) + ", plugin dev " + fmt(worst_plugin) + ", risk dev " + fmt(worst_risk)};
}

Outcome rate_recovery() {
  bool ok = true;
  std::string detail;
  for (double k : {4.0, 6.0, 8.0, 12.0}) {
    const SweepConfig sweep = two_point_sweep(k, log_grid(1e-3, 1e-1, 8), 4);
    const SlopeFit fit = fit_exponent(run_sweep(sweep), "pgw");
    const double target = k == 4.0 ? 0.0 : 0.5 - 2.0 / k;
    ok = ok && std::abs(fit.exponent - target) <= 0.03;
    detail += (detail.empty() ? "" : ", ") + std::string("k=") + fmt(k) + " slope " + fmt(fit.exponent) + " vs " +
              fmt(target);
  }
  return {ok, detail};
}

Outcome breakdown() {
  double worst = 0.0, weakest_clean = std::numeric_limits<double>::infinity();
  int bad = 0;
  for (int t = 0; t < 10; ++t) {
    const CleanPair pair = separated_pair(1 + static_cast<std::size_t>(t) % 3, derive_seed(5, "pair", t));
    const std::string tag = std::to_string(t);
    const fs::path a = g_work / ("blend_mu_" + tag + ".json"), b = g_work / ("blend_nu_" + tag + ".json");
    const fs::path ba = g_work / ("blend_out_mu_" + tag + ".json"), bb = g_work / ("blend_out_nu_" + tag + ".json");
    write_measure(pair.mu, a);
    write_measure(pair.nu, b);
    const CliResult con = run_cli("contaminate " + q(a) + " --other " + q(b) + " --eps 0.34 --kind mirror_blend --out " +
                                  q(ba) + " --out-other " + q(bb));
    if (con.status != 0) return {false, "contaminate failed: " + con.out};
    const double v = cli_value(run_cli("pgw " + q(ba) + " " + q(bb) + " --eps 0.34 --seed " + tag));
    if (!(v <= 1e-6) || !(pair.certified_lower > 0.1)) ++bad;
    worst = std::isnan(v) ? v : std::max(worst, v);
    weakest_clean = std::min(weakest_clean, pair.certified_lower);
  }
  return {bad == 0, "max blended pgw " + fmt(worst) + ", min certified clean GW " + fmt(weakest_clean)};
}

struct Triple {
  MMSpace a, b, c;
};

// Best of the solver and the lattice oracle; both are upper bounds.
double best_pgw(const MMSpace& x, const MMSpace& y, double eps, std::uint64_t seed) {
  SolverConfig c;
  c.trim = eps;
  c.restarts = 20;
  c.seed = seed;
  return std::min(solve_pgw(x, y, c).value, brute_force_gw(x, y, eps, 40));
}

Outcome approximate_triangle() {
  Rng rng(606);
  std::uniform_int_distribution<int> atoms(1, 3);
  double worst = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < 50; ++t) {
    const std::size_t dim = 1 + static_cast<std::size_t>(t) % 2;
    const Triple tr{MMSpace(random_measure(rng, static_cast<std::size_t>(atoms(rng)), dim)),
                    MMSpace(random_measure(rng, static_cast<std::size_t>(atoms(rng)), dim)),
                    MMSpace(random_measure(rng, static_cast<std::size_t>(atoms(rng)), dim))};
    const std::uint64_t s = derive_seed(606, "triple", t);
    for (double e : {0.0, 0.05, 0.1}) {
      for (double d : {0.0, 0.05, 0.1}) {
        const double lhs = best_pgw(tr.a, tr.c, e + d, s);
        const double rhs = best_pgw(tr.a, tr.b, e, s) + best_pgw(tr.b, tr.c, d, s);
        worst = std::max(worst, lhs - rhs);
      }
    }
  }
  return {worst <= 1e-4, "max violation " + fmt(worst) + " over 450 checks"};
}

Outcome oracle_equivalence() {
  Rng rng(707);
  double lo = 0.0, hi = 0.0;
  for (int t = 0; t < 30; ++t) {
    const std::size_t m = 1 + static_cast<std::size_t>(t) % 3;
    const std::size_t n = 1 + static_cast<std::size_t>(t / 3) % 3;
    const std::size_t dim = 1 + static_cast<std::size_t>(t) % 3;
    const MMSpace x(random_measure(rng, m, dim)), y(random_measure(rng, n, dim));
    const double eps = t % 2 ? 0.1 : 0.0;
    SolverConfig c;
    c.trim = eps;
    c.restarts = 20;
    c.seed = static_cast<std::uint64_t>(t);
    const double diff = solve_pgw(x, y, c).value - brute_force_gw(x, y, eps, 40);
    lo = std::min(lo, diff);
    hi = std::max(hi, diff);
  }
  return {lo >= -1e-6 && hi <= 1e-3, "solver minus oracle in [" + fmt(lo) + ", " + fmt(hi) + "]"};
}

Outcome gradient_check() {
  Rng rng(808);
  std::uniform_int_distribution<int> size(1, 5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 30; ++t) {
    const auto m = static_cast<std::size_t>(size(rng)), n = static_cast<std::size_t>(size(rng));
    const MMSpace x(random_measure(rng, m, 2)), y(random_measure(rng, n, 2));
    const QuadraticDistortion qd(x.cost(), y.cost());
    Matrix p(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = unit(rng) / static_cast<double>(m * n);
    const Matrix g = qd.gradient(p);
    Matrix fd(p.rows(), p.cols());
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        Matrix up = p, down = p;
        up(i, j) += h;
        down(i, j) -= h;
        fd(i, j) = (qd.value(up) - qd.value(down)) / (2.0 * h);
      }
    }
    const double scale = std::max(g.cwiseAbs().maxCoeff(), 1e-12);
    worst = std::max(worst, (g - fd).cwiseAbs().maxCoeff() / scale);
  }
  return {worst <= 1e-5, "max relative error " + fmt(worst)};
}

DiscreteMeasure scaled_points(const DiscreteMeasure& m, double s) {
  return DiscreteMeasure(s * m.points(), std::vector<double>(m.weights().begin(), m.weights().end()));
}

Outcome invariances() {
  Rng rng(909);
  double rigid = 0.0, scale_dev = 0.0, sym = 0.0;
  for (int t = 0; t < 10; ++t) {
    const std::size_t dim = 1 + static_cast<std::size_t>(t) % 3;
    const DiscreteMeasure xm = random_measure(rng, 3 + static_cast<std::size_t>(t) % 4, dim);
    const DiscreteMeasure ym = random_measure(rng, 3 + static_cast<std::size_t>(t + 1) % 4, dim, 1.5);
    SolverConfig c;
    c.trim = t % 2 ? 0.1 : 0.0;
    c.restarts = 20;
    c.seed = static_cast<std::uint64_t>(t);
    const MMSpace x(xm), y(ym);
    const double base = solve_pgw(x, y, c).value;
    const MMSpace xr(apply_isometry(xm, random_rotation(rng, dim), random_shift(rng, dim)));
    const MMSpace yr(apply_isometry(ym, random_rotation(rng, dim), random_shift(rng, dim)));
    rigid = std::max(rigid, std::abs(solve_pgw(xr, yr, c).value - base));
    sym = std::max(sym, std::abs(solve_pgw(y, x, c).value - base));
    for (double s : {0.1, 3.0}) {
      const MMSpace xs(scaled_points(xm, s)), ys(scaled_points(ym, s));
      scale_dev = std::max(scale_dev, std::abs(solve_pgw(xs, ys, c).value - s * s * base) / (s * s * base));
    }
  }
  const bool ok = rigid <= 1e-6 && scale_dev <= 1e-6 && sym <= 1e-6;
  return {ok, "rigid dev " + fmt(rigid) + ", scale rel dev " + fmt(scale_dev) + ", symmetry dev " + fmt(sym)};
}

Outcome finite_sample_structure() {
  SweepConfig c;
  c.family.member = "two_atom";
  c.adversary.kind = AttackKind::far_outlier;
  EstimatorSpec pgw;
  pgw.kind = EstimatorKind::pgw;
  EstimatorSpec plugin;
  plugin.kind = EstimatorKind::plugin_gw;
  c.estimators = {pgw, plugin};
  c.eps_grid = {0.0, 0.05};
  c.master_seed = 10;
  SweepConfig sampled = c;
  sampled.n_grid = {100, 400, 1600};
  sampled.trials = 100;

  std::map<double, double> population;
  for (const CellSummary& s : summarize(run_sweep(c))) {
    if (s.estimator_kind == "pgw") population[s.eps] = s.mean_abs_error;
  }
  std::map<std::size_t, double> clean_plugin;
  std::vector<CellSummary> cells = summarize(run_sweep(sampled, {.jobs = 2}));
  for (const CellSummary& s : cells) {
    if (s.estimator_kind == "plugin_gw" && s.eps == 0.0) clean_plugin[s.n] = s.mean_abs_error;
  }
  bool ok = true;
  double worst_slack = std::numeric_limits<double>::infinity();
  for (const CellSummary& s : cells) {
    if (s.estimator_kind != "pgw") continue;
    const double bound = population[s.eps] + 3.0 * clean_plugin[s.n];
    ok = ok && s.failures == 0 && s.mean_abs_error <= bound;
    worst_slack = std::min(worst_slack, bound - s.mean_abs_error);
  }
  return {ok, "min slack " + fmt(worst_slack) + " over 6 cells"};
}

Outcome convergence_trend() {
  const std::vector<CellSummary> cells = summarize(convergence_study(FamilySpec{}, {100, 10000}, 200, 11, 2));
  const CellSummary& small = cells.front();
  const CellSummary& large = cells.back();
  const double margin = 3.0 * std::hypot(small.stderr_abs_error, large.stderr_abs_error);
  return {large.mean_abs_error + margin < small.mean_abs_error,
          "n=100 " + fmt(small.mean_abs_error) + " vs n=10000 " + fmt(large.mean_abs_error) + ", margin " + fmt(margin)};
}

void write_json(const fs::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(2) << '\n'; }

Outcome determinism() {
  const nlohmann::json base_family = {{"family", "bounded_moment_k"}, {"sigma", 1.0}, {"k", 8}, {"dim", 1}};
  std::vector<nlohmann::json> configs;
  configs.push_back({{"family", base_family},
                     {"adversary", {{"kind", "two_point"}}},
                     {"estimators", {{{"kind", "pgw"}}, {{"kind", "plugin_gw"}}}},
                     {"sweep", {{"eps_grid", {0.01, 0.02, 0.05, 0.1}}}},
                     {"seed", 3}});
  configs.push_back({{"family", base_family},
                     {"adversary", {{"kind", "two_point"}}},
                     {"estimators", {{{"kind", "pgw"}}}},
                     {"sweep", {{"eps_grid", log_grid(1e-3, 1e-1, 8)}, {"trials", 2}}},
                     {"seed", 4}});
  configs.push_back({{"family", base_family},
                     {"adversary", {{"kind", "mirror_blend"}}},
                     {"estimators", {{{"kind", "pgw"}, {"allow_breakdown", true}}, {{"kind", "plugin_gw"}}}},
                     {"sweep", {{"eps_grid", {0.34}}, {"trials", 10}}},
                     {"seed", 5}});
  int mismatches = 0;
  std::size_t bytes = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const fs::path cfg = g_work / ("det_" + std::to_string(i) + ".json");
    write_json(cfg, configs[i]);
    std::vector<std::string> csvs;
    for (const std::string jobs : {"1", "1", "3"}) {
      const fs::path out = g_work / ("det_" + std::to_string(i) + "_" + std::to_string(csvs.size()));
      const CliResult r = run_cli("risk-sweep " + q(cfg) + " --jobs " + jobs + " --out " + q(out));
      if (r.status != 0) return {false, "risk-sweep failed: " + r.out};
      csvs.push_back(slurp(out.string() + ".csv"));
    }
    bytes += csvs[0].size();
    for (const std::string& s : csvs) mismatches += s != csvs[0] || s.empty();
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatching CSVs, " + std::to_string(bytes) + " bytes per run set"};
}

}  // namespace

int main() {
  g_work = fs::temp_directory_path() / ("rgw_acceptance_" + std::to_string(getpid()));
  fs::create_directories(g_work);

  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "nullity under isometry and trimmed outliers", 60, nullity_isometry},
      {2, "three-point counterexample", 10, counterexample_triple},
      {3, "two-point exactness", 60, two_point_exactness},
      {4, "rate recovery", 300, rate_recovery},
      {5, "breakdown at eps 0.34", 120, breakdown},
      {6, "approximate triangle inequality", 600, approximate_triangle},
      {7, "solver matches brute-force oracle", 600, oracle_equivalence},
      {8, "gradient vs finite differences", 10, gradient_check},
      {9, "rigid, scale and swap invariances", 120, invariances},
      {10, "finite-sample error structure", 1800, finite_sample_structure},
      {11, "empirical convergence trend", 600, convergence_trend},
      {12, "byte-identical reruns", 300, determinism},
  };

  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.passed && in_time;
    failed += !pass;
    std::cout << "criterion " << c.id << " [" << c.name << "]: " << (pass ? "PASS" : "FAIL") << " (" << o.detail
              << "; " << fmt(secs) << " s" << (in_time ? "" : ", over time budget") << ")" << std::endl;
  }
  fs::remove_all(g_work);
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
