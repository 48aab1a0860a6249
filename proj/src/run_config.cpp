#include "rgw/run_config.hpp"

#include <cctype>
#include <vector>

#include "rgw/errors.hpp"
#include "rgw/json_util.hpp"

namespace rgw {

namespace {

struct Frame {
  bool object = false;
  std::string path;
  std::string key;
  int index = 0;
  bool expect_key = false;
};

std::string child_path(const Frame& f) {
  return f.object ? join_path(f.path, f.key) : f.path + "[" + std::to_string(f.index) + "]";
}

std::pair<int, int> line_col_at(const std::string& text, std::size_t offset) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

[[noreturn]] void fail_at(const std::string& text, const std::string& source, const ConfigError& e) {
  const auto where = locate_json_paths(text);
  std::pair<int, int> pos{1, 1};
  std::string probe = e.path();
  while (true) {
    const auto it = where.find(probe);
    if (it != where.end()) {
      pos = it->second;
      break;
    }
    const auto cut = probe.find_last_of(".[");
    if (cut == std::string::npos) break;
    probe = probe.substr(0, cut);
  }
  throw InputError(source + ":" + std::to_string(pos.first) + ":" + std::to_string(pos.second) + ": " + e.path() +
                   ": " + e.message());
}

void check_positive_sizes(const nlohmann::json& j, const std::string& path, bool increasing) {
  if (!j.is_array()) throw ConfigError(path, "expected an array");
  long long prev = 0;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = path + "[" + std::to_string(i) + "]";
    if (!j[i].is_number_unsigned() || j[i].get<long long>() < 1) throw ConfigError(at, "expected a positive integer");
    if (increasing && i > 0 && j[i].get<long long>() <= prev) throw ConfigError(at, "must be increasing");
    prev = j[i].get<long long>();
  }
}

RunConfig parse_tree(const nlohmann::json& j, RunKind kind) {
  reject_unknown_keys(j, {"family", "adversary", "estimator", "estimators", "solver", "sweep", "out_path", "seed"},
                      "");
  RunConfig cfg;
  if (j.contains("family")) cfg.sweep.family = family_from_json(j["family"], "family");
  if (j.contains("adversary")) {
    reject_unknown_keys(j["adversary"], {"kind", "params"}, "adversary");
    cfg.sweep.adversary = contamination_from_json(j["adversary"], "adversary");
  }
  if (j.contains("solver")) cfg.solver = solver_from_json(j["solver"], "solver");
  if (j.contains("estimator") && j.contains("estimators")) {
    throw ConfigError("estimator", "give either estimator or estimators, not both");
  }
  if (j.contains("estimator")) {
    cfg.sweep.estimators.push_back(estimator_from_json(j["estimator"], "estimator", cfg.solver));
  }
  if (j.contains("estimators")) {
    if (!j["estimators"].is_array()) throw ConfigError("estimators", "expected an array");
    for (std::size_t i = 0; i < j["estimators"].size(); ++i) {
      cfg.sweep.estimators.push_back(
          estimator_from_json(j["estimators"][i], "estimators[" + std::to_string(i) + "]", cfg.solver));
    }
  }
  if (j.contains("sweep")) {
    const nlohmann::json& s = j["sweep"];
    reject_unknown_keys(s, {"eps_grid", "n_grid", "trials", "clean_restart_factor", "record_wall_time"}, "sweep");
    if (s.contains("eps_grid")) {
      if (!s["eps_grid"].is_array()) throw ConfigError("sweep.eps_grid", "expected an array");
      for (std::size_t i = 0; i < s["eps_grid"].size(); ++i) {
        const nlohmann::json& e = s["eps_grid"][i];
        const std::string at = "sweep.eps_grid[" + std::to_string(i) + "]";
        if (!e.is_number()) throw ConfigError(at, "expected a number");
        if (!(e.get<double>() >= 0.0 && e.get<double>() <= 0.49)) throw ConfigError(at, "must lie in [0, 0.49]");
        cfg.sweep.eps_grid.push_back(e.get<double>());
      }
    }
    if (s.contains("n_grid")) {
      check_positive_sizes(s["n_grid"], "sweep.n_grid", kind == RunKind::convergence);
      cfg.sweep.n_grid = s["n_grid"].get<std::vector<std::size_t>>();
    }
    cfg.sweep.trials = get_or(s, "trials", cfg.sweep.trials, "sweep");
    if (cfg.sweep.trials < 1) throw ConfigError("sweep.trials", "must be at least 1");
    cfg.sweep.clean_restart_factor = get_or(s, "clean_restart_factor", cfg.sweep.clean_restart_factor, "sweep");
    if (cfg.sweep.clean_restart_factor < 1) throw ConfigError("sweep.clean_restart_factor", "must be at least 1");
    cfg.sweep.record_wall_time = get_or(s, "record_wall_time", cfg.sweep.record_wall_time, "sweep");
  }
  if (j.contains("out_path")) {
    cfg.out_path = get_or<std::string>(j, "out_path", "", "");
    if (cfg.out_path.empty()) throw ConfigError("out_path", "must not be empty");
  }
  if (j.contains("seed")) cfg.seed = get_or<std::uint64_t>(j, "seed", 0, "");

  switch (kind) {
    case RunKind::risk_sweep:
      if (cfg.sweep.eps_grid.empty()) throw ConfigError("sweep.eps_grid", "must not be empty");
      if (cfg.sweep.estimators.empty()) throw ConfigError("estimators", "at least one estimator is required");
      try {
        cfg.sweep.validate();
      } catch (const InputError& e) {
        throw ConfigError("sweep", bare_message(e));
      }
      break;
    case RunKind::convergence:
      if (cfg.sweep.n_grid.empty()) throw ConfigError("sweep.n_grid", "must not be empty");
      break;
    case RunKind::metric_suite:
      break;
  }
  return cfg;
}

}  // namespace

std::map<std::string, std::pair<int, int>> locate_json_paths(const std::string& text) {
  std::map<std::string, std::pair<int, int>> out;
  std::vector<Frame> stack;
  int line = 1, col = 1;
  auto advance = [&](char c) {
    if (c == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  };
  auto value_starts = [&]() -> std::string {
    if (stack.empty()) return "";
    Frame& top = stack.back();
    const std::string p = child_path(top);
    if (!top.object) out.emplace(p, std::make_pair(line, col));
    return p;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '"') {
      const int l0 = line, c0 = col;
      std::string s;
      advance(c);
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) {
          advance(text[i]);
          ++i;
        }
        s += text[i];
        advance(text[i]);
      }
      if (i < text.size()) advance(text[i]);
      if (!stack.empty() && stack.back().object && stack.back().expect_key) {
        stack.back().key = s;
        stack.back().expect_key = false;
        out.emplace(join_path(stack.back().path, s), std::make_pair(l0, c0));
      } else {
        value_starts();
      }
      continue;
    }
    if (c == '{' || c == '[') {
      const std::string p = value_starts();
      stack.push_back({c == '{', p, "", 0, c == '{'});
    } else if (c == '}' || c == ']') {
      if (!stack.empty()) stack.pop_back();
    } else if (c == ',') {
      if (!stack.empty()) {
        if (stack.back().object) {
          stack.back().expect_key = true;
        } else {
          ++stack.back().index;
        }
      }
    } else if (c == '-' || std::isdigit(static_cast<unsigned char>(c)) || c == 't' || c == 'f' || c == 'n') {
      value_starts();
      while (i + 1 < text.size() && !std::isspace(static_cast<unsigned char>(text[i + 1])) && text[i + 1] != ',' &&
             text[i + 1] != '}' && text[i + 1] != ']') {
        advance(text[i]);
        ++i;
      }
    }
    advance(text[i]);
  }
  return out;
}

RunConfig parse_run_config(const std::string& text, const std::string& source, RunKind kind) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = line_col_at(text, e.byte > 0 ? e.byte - 1 : 0);
    throw InputError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON");
  }
  try {
    return parse_tree(j, kind);
  } catch (const ConfigError& e) {
    fail_at(text, source, e);
  }
}

nlohmann::json resolved_run_config(const RunConfig& cfg, std::uint64_t seed) {
  nlohmann::json j = to_json(cfg.sweep);
  j["seed"] = seed;
  j["solver"] = to_json(cfg.solver);
  if (!cfg.out_path.empty()) j["out_path"] = cfg.out_path;
  return j;
}

}  // namespace rgw
