#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rgw/contamination.hpp"
#include "rgw/errors.hpp"
#include "rgw/experiments.hpp"
#include "rgw/format.hpp"
#include "rgw/run_config.hpp"
#include "rgw/solvers.hpp"

namespace fs = std::filesystem;
using namespace rgw;

namespace {

constexpr int kOk = 0;
constexpr int kPropertyFailure = 1;
constexpr int kInputError = 2;
constexpr int kNumericalError = 3;

std::uint64_t parse_seed(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
    const unsigned long long v = std::stoull(text, &used, 0);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw InputError(what + " is not a 64-bit unsigned integer: \"" + text + "\"");
  }
}

// --seed, then the config file, then RGW_SEED, then 0.
std::uint64_t resolve_seed(const std::optional<std::string>& flag, std::optional<std::uint64_t> from_config) {
  if (flag) return parse_seed(*flag, "--seed");
  if (from_config) return *from_config;
  if (const char* env = std::getenv("RGW_SEED"); env && *env) return parse_seed(env, "RGW_SEED");
  return 0;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

fs::path with_suffix(const std::string& base, const std::string& suffix) { return fs::path(base + suffix); }

struct SolveArgs {
  std::string x_path, y_path;
  double eps = 0.0;
  int restarts = SolverConfig{}.restarts;
  double tol = SolverConfig{}.fw_gap_tol;
  std::optional<std::string> seed;
  std::string dump_coupling;
  bool omit_timing = false;
};

int run_solve(const SolveArgs& a) {
  const MMSpace x(read_measure(a.x_path));
  const MMSpace y(read_measure(a.y_path));
  if (!(a.eps >= 0.0 && a.eps < 1.0)) throw InputError("--eps must lie in [0, 1)");
  SolverConfig cfg;
  cfg.trim = a.eps;
  cfg.restarts = a.restarts;
  cfg.fw_gap_tol = a.tol;
  cfg.seed = resolve_seed(a.seed, std::nullopt);
  const SolveReport r = solve_pgw(x, y, cfg);
  const nlohmann::json out = {{"value", r.value},
                              {"fw_gap", r.fw_gap_final},
                              {"restarts", cfg.restarts},
                              {"wall_time", a.omit_timing ? 0.0 : r.wall_time}};
  std::cout << out.dump() << '\n';
  if (!a.dump_coupling.empty()) {
    nlohmann::json mass = nlohmann::json::array();
    for (Eigen::Index i = 0; i < r.coupling.mass.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < r.coupling.mass.cols(); ++j) row.push_back(r.coupling.mass(i, j));
      mass.push_back(row);
    }
    write_text(a.dump_coupling, nlohmann::json{{"trim", cfg.trim}, {"mass", mass}}.dump(2) + "\n");
  }
  return kOk;
}

struct ContaminateArgs {
  std::string in, other, out, out_other, sidecar, kind;
  double eps = 0.0;
  std::optional<std::string> seed;
  std::optional<double> R, a;
};

int run_contaminate(const ContaminateArgs& a) {
  ContaminationSpec spec;
  spec.kind = parse_attack_kind(a.kind);
  spec.eps = a.eps;
  spec.seed = resolve_seed(a.seed, std::nullopt);
  if (a.R) spec.params["R"] = *a.R;
  if (a.a) spec.params["a"] = *a.a;
  spec.validate();
  const DiscreteMeasure mu = read_measure(a.in);

  nlohmann::json side = {{"kind", a.kind}, {"eps", a.eps}, {"seed", spec.seed}, {"tv_budget", a.eps}};
  DiscreteMeasure out;
  switch (spec.kind) {
    case AttackKind::far_outlier:
    case AttackKind::two_point: {
      if (spec.kind == AttackKind::two_point && !a.a) throw InputError("two_point needs --a");
      if (a.eps == 0.0) {
        out = mu;
        side["modified_atoms"] = nlohmann::json::array();
        break;
      }
      if (spec.kind == AttackKind::far_outlier) {
        out = far_outlier(mu, a.eps, spec.param("R", 1e3), spec.seed);
      } else {
        Eigen::RowVectorXd at = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(mu.dim()));
        at(0) = *a.a;
        out = mu.scaled(1.0 - a.eps).with_atom(at, a.eps);
      }
      side["modified_atoms"] = {out.size() - 1};
      break;
    }
    case AttackKind::sample_replacement: {
      const CorruptedSamples c = corrupt_samples(mu.points(), a.eps, spec);
      std::vector<double> w(mu.weights().begin(), mu.weights().end());
      out = DiscreteMeasure(c.points, w);
      side["modified_atoms"] = c.modified;
      break;
    }
    case AttackKind::mirror_blend: {
      if (a.other.empty() || a.out_other.empty()) throw InputError("mirror_blend needs --other and --out-other");
      const DiscreteMeasure nu = read_measure(a.other);
      const BlendedPair b = mirror_blend(mu, nu, a.eps);
      out = b.mu;
      write_measure(b.nu, a.out_other);
      const double clean = tv_distance(mu, nu);
      const double blended = tv_distance(b.mu, b.nu);
      side["tv_clean"] = clean;
      side["tv_blended"] = blended;
      side["tv_identity_holds"] = std::abs(blended - std::abs(1.0 - 2.0 * a.eps) * clean) <= 1e-12;
      side["tv_measured_other"] = tv_distance(b.nu, nu);
      side["modified_atoms"] = nlohmann::json::array();
      break;
    }
  }
  side["tv_measured"] = tv_distance(out, mu);
  write_measure(out, a.out);
  write_text(a.sidecar.empty() ? with_suffix(a.out, ".sidecar.json") : fs::path(a.sidecar), side.dump(2) + "\n");
  return kOk;
}

struct SweepArgs {
  std::string config;
  std::optional<std::string> seed;
  std::string out;
  int jobs = 1;
};

RunConfig load_config(const std::string& path, RunKind kind) {
  return parse_run_config(read_text(path), path, kind);
}

std::string output_base(const SweepArgs& a, const RunConfig& cfg, const std::string& fallback) {
  if (!a.out.empty()) return a.out;
  if (!cfg.out_path.empty()) return cfg.out_path;
  return fallback;
}

int run_risk_sweep(const SweepArgs& a) {
  if (a.jobs < 1) throw InputError("--jobs must be positive");
  RunConfig cfg = load_config(a.config, RunKind::risk_sweep);
  const std::uint64_t seed = resolve_seed(a.seed, cfg.seed);
  cfg.sweep.master_seed = seed;
  const std::string base = output_base(a, cfg, "risk_sweep");
  write_text(with_suffix(base, ".config.json"), resolved_run_config(cfg, seed).dump(2) + "\n");

  const fs::path journal_path = with_suffix(base, ".journal.csv");
  std::ofstream journal(journal_path, std::ios::binary);
  if (!journal) throw InputError("cannot write " + journal_path.string());
  journal << kRecordCsvHeader << '\n' << std::flush;
  SweepOptions opts;
  opts.jobs = a.jobs;
  opts.on_trial = [&journal](const std::vector<RiskRecord>& cell) {
    for (const RiskRecord& r : cell) journal << record_csv_line(r) << '\n';
    journal.flush();
  };
  const std::vector<RiskRecord> records = run_sweep(cfg.sweep, opts);
  write_records_csv(records, with_suffix(base, ".csv"));
  const std::vector<PropertyCheck> checks = sweep_checks(cfg.sweep, records);
  nlohmann::json summary = sweep_summary(cfg.sweep, records, checks);
  summary["config"] = resolved_run_config(cfg, seed);
  write_text(with_suffix(base, ".summary.json"), summary.dump(2) + "\n");

  bool ok = true;
  for (const PropertyCheck& c : checks) {
    if (c.hard && !c.passed) {
      ok = false;
      std::cerr << "check failed: " << c.name << " measured " << shortest_repr(c.measured) << '\n';
    }
  }
  return ok ? kOk : kPropertyFailure;
}

int run_convergence(const SweepArgs& a) {
  if (a.jobs < 1) throw InputError("--jobs must be positive");
  RunConfig cfg = load_config(a.config, RunKind::convergence);
  const std::uint64_t seed = resolve_seed(a.seed, cfg.seed);
  cfg.sweep.master_seed = seed;
  const std::string base = output_base(a, cfg, "convergence");
  write_text(with_suffix(base, ".config.json"), resolved_run_config(cfg, seed).dump(2) + "\n");
  const std::vector<RiskRecord> records =
      convergence_study(cfg.sweep.family, cfg.sweep.n_grid, cfg.sweep.trials, seed, a.jobs);
  write_records_csv(records, with_suffix(base, ".csv"));

  std::vector<PropertyCheck> checks = sweep_checks(cfg.sweep, records);
  const std::vector<CellSummary> cells = summarize(records);
  if (cells.size() >= 2) {
    const CellSummary& first = cells.front();
    const CellSummary& last = cells.back();
    const double margin = 3.0 * std::hypot(first.stderr_abs_error, last.stderr_abs_error);
    checks.push_back({"error_decreases_in_n", false, last.mean_abs_error + margin < first.mean_abs_error,
                      first.mean_abs_error - last.mean_abs_error, margin,
                      "mean error at the largest n is below the smallest n by 3 standard errors"});
  }
  nlohmann::json summary = sweep_summary(cfg.sweep, records, checks);
  summary.erase("slope_fits");
  summary["truth"] = family_gw_to_point(cfg.sweep.family);
  summary["config"] = resolved_run_config(cfg, seed);
  write_text(with_suffix(base, ".summary.json"), summary.dump(2) + "\n");
  for (const PropertyCheck& c : checks) {
    if (c.hard && !c.passed) return kPropertyFailure;
  }
  return kOk;
}

int run_metric_suite(const SweepArgs& a) {
  RunConfig cfg;
  if (!a.config.empty()) cfg = load_config(a.config, RunKind::metric_suite);
  const std::uint64_t seed = resolve_seed(a.seed, cfg.seed);
  const MetricReport report = metric_suite(seed);
  nlohmann::json checks = nlohmann::json::array();
  for (const PropertyCheck& c : report.checks) checks.push_back(to_json(c));
  const nlohmann::json out = {{"seed", seed}, {"passed", report.passed()}, {"checks", checks}};
  std::cout << out.dump(2) << '\n';
  const std::string base = output_base(a, cfg, "");
  if (!base.empty()) write_text(with_suffix(base, ".json"), out.dump(2) + "\n");
  return report.passed() ? kOk : kPropertyFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gromov-Wasserstein and partial GW distances with a robustness benchmark harness"};
  app.require_subcommand(1);

  SolveArgs gw_args;
  auto add_solve_flags = [](CLI::App* cmd, SolveArgs& a) {
    cmd->add_option("x", a.x_path, "first measure file (.json or .csv)")->required();
    cmd->add_option("y", a.y_path, "second measure file")->required();
    cmd->add_option("--restarts", a.restarts, "Frank-Wolfe starts")->check(CLI::PositiveNumber);
    cmd->add_option("--tol", a.tol, "Frank-Wolfe gap tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", a.seed, "64-bit seed (default: RGW_SEED, else 0)");
    cmd->add_option("--dump-coupling", a.dump_coupling, "write the best coupling as JSON");
    cmd->add_flag("--omit-timing", a.omit_timing, "report wall_time as 0");
  };
  CLI::App* gw = app.add_subcommand("gw", "GW distance between two measures");
  add_solve_flags(gw, gw_args);

  SolveArgs pgw_args;
  CLI::App* pgw = app.add_subcommand("pgw", "partial GW distance with trimmed mass eps");
  add_solve_flags(pgw, pgw_args);
  pgw->add_option("--eps", pgw_args.eps, "trimmed mass in [0, 1)")->required();

  ContaminateArgs con;
  CLI::App* contaminate = app.add_subcommand("contaminate", "apply a TV contamination to a measure file");
  contaminate->add_option("input", con.in, "measure file")->required();
  contaminate->add_option("--eps", con.eps, "contamination budget")->required();
  contaminate->add_option("--kind", con.kind, "two_point | far_outlier | mirror_blend | sample_replacement")
      ->required();
  contaminate->add_option("--seed", con.seed, "64-bit seed");
  contaminate->add_option("--out", con.out, "output measure file")->required();
  contaminate->add_option("--other", con.other, "second measure (mirror_blend)");
  contaminate->add_option("--out-other", con.out_other, "second output (mirror_blend)");
  contaminate->add_option("--sidecar", con.sidecar, "sidecar JSON path (default: <out>.sidecar.json)");
  contaminate->add_option("--R", con.R, "outlier distance (far_outlier, sample_replacement)");
  contaminate->add_option("--a", con.a, "atom location along the first axis (two_point)");

  SweepArgs sweep_args, conv_args, suite_args;
  auto add_run_flags = [](CLI::App* cmd, SweepArgs& a, bool config_required) {
    auto* opt = cmd->add_option("config", a.config, "run config JSON");
    if (config_required) opt->required();
    cmd->add_option("--seed", a.seed, "64-bit seed (overrides the config)");
    cmd->add_option("--out", a.out, "output path prefix (overrides out_path)");
    cmd->add_option("--jobs", a.jobs, "worker threads");
  };
  CLI::App* sweep = app.add_subcommand("risk-sweep", "Monte Carlo risk sweep");
  add_run_flags(sweep, sweep_args, true);
  CLI::App* conv = app.add_subcommand("convergence", "empirical convergence study against a point mass");
  add_run_flags(conv, conv_args, true);
  CLI::App* suite = app.add_subcommand("metric-suite", "pseudo-metric property checks");
  add_run_flags(suite, suite_args, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (gw->parsed()) return run_solve(gw_args);
    if (pgw->parsed()) return run_solve(pgw_args);
    if (contaminate->parsed()) return run_contaminate(con);
    if (sweep->parsed()) return run_risk_sweep(sweep_args);
    if (conv->parsed()) return run_convergence(conv_args);
    if (suite->parsed()) return run_metric_suite(suite_args);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  }
  return kInputError;
}
