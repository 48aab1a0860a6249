#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + RGW_CLI_PATH + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workdir {
  fs::path path;
  Workdir() : path(fs::temp_directory_path() / ("rgw_cli_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
    std::ofstream(path / "a.json") << R"({"dim": 1, "points": [[0], [1], [3]], "weights": [0.2, 0.3, 0.5]})";
    std::ofstream(path / "b.json") << R"({"dim": 1, "points": [[0], [2], [5]], "weights": [0.5, 0.3, 0.2]})";
    std::ofstream(path / "sweep.json") << R"({
  "family": {"family": "bounded_moment_k", "k": 8},
  "adversary": {"kind": "two_point"},
  "estimators": [{"kind": "pgw"}, {"kind": "plugin_gw"}],
  "sweep": {"eps_grid": [0.01, 0.05, 0.1], "trials": 2}
})";
  }
  ~Workdir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return "'" + (path / name).string() + "'"; }
};

}  // namespace

TEST_CASE("gw and pgw print a JSON report") {
  Workdir w;
  const Run r = cli("gw " + (w / "a.json") + " " + (w / "b.json") + " --omit-timing");
  REQUIRE(r.status == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("value").get<double>() > 0.0);
  CHECK(j.at("wall_time").get<double>() == 0.0);
  CHECK(j.at("restarts").get<int>() == 10);
  const Run again = cli("gw " + (w / "a.json") + " " + (w / "b.json") + " --omit-timing");
  CHECK(again.out == r.out);
  // Trimming 0.2 leaves isometric pieces of these two measures.
  const Run p = cli("pgw " + (w / "a.json") + " " + (w / "b.json") + " --eps 0.2 --dump-coupling " + (w / "c.json"));
  REQUIRE(p.status == 0);
  CHECK(nlohmann::json::parse(p.out).at("value").get<double>() <= 1e-9);
  const auto coupling = nlohmann::json::parse(slurp(w.path / "c.json"));
  CHECK(coupling.at("mass").size() == 3);
}

TEST_CASE("bad input exits with status 2") {
  Workdir w;
  CHECK(cli("pgw " + (w / "a.json") + " " + (w / "b.json") + " --eps 1").status == 2);
  CHECK(cli("gw " + (w / "a.json") + " " + (w / "missing.json")).status == 2);
  CHECK(cli("contaminate " + (w / "a.json") + " --eps 0.1 --kind nope --out " + (w / "o.json")).status == 2);
  CHECK(cli("frobnicate").status == 2);
  CHECK(cli("risk-sweep " + (w / "a.json")).status == 2);
}

TEST_CASE("contaminate writes the measure and a sidecar") {
  Workdir w;
  const Run r = cli("contaminate " + (w / "a.json") + " --eps 0.1 --kind far_outlier --seed 4 --out " + (w / "o.json"));
  REQUIRE(r.status == 0);
  const auto side = nlohmann::json::parse(slurp(w.path / "o.json.sidecar.json"));
  CHECK(side.at("tv_budget").get<double>() == 0.1);
  CHECK(side.at("tv_measured").get<double>() == doctest::Approx(0.1));
  CHECK(side.at("modified_atoms").size() == 1);
  const Run b = cli("contaminate " + (w / "a.json") + " --other " + (w / "b.json") +
                    " --eps 0.3 --kind mirror_blend --out " + (w / "m1.json") + " --out-other " + (w / "m2.json"));
  REQUIRE(b.status == 0);
  CHECK(nlohmann::json::parse(slurp(w.path / "m1.json.sidecar.json")).at("tv_identity_holds").get<bool>());
}

TEST_CASE("risk-sweep writes deterministic artifacts") {
  Workdir w;
  REQUIRE(cli("risk-sweep " + (w / "sweep.json") + " --out " + (w / "r1")).status == 0);
  REQUIRE(cli("risk-sweep " + (w / "sweep.json") + " --jobs 3 --out " + (w / "r2")).status == 0);
  const std::string csv = slurp(w.path / "r1.csv");
  CHECK(csv == slurp(w.path / "r2.csv"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
  CHECK(slurp(w.path / "r1.summary.json") == slurp(w.path / "r2.summary.json"));
  const std::string journal = slurp(w.path / "r1.journal.csv");
  CHECK(std::count(journal.begin(), journal.end(), '\n') == 13);
  CHECK(fs::exists(w.path / "r1.config.json"));
}

TEST_CASE("seed precedence is flag, then config, then environment") {
  Workdir w;
  auto seed_of = [&](const std::string& out) {
    return nlohmann::json::parse(slurp(w.path / (out + ".config.json"))).at("seed").get<std::uint64_t>();
  };
  REQUIRE(cli("risk-sweep " + (w / "sweep.json") + " --out " + (w / "s0")).status == 0);
  CHECK(seed_of("s0") == 0);
  REQUIRE(cli("risk-sweep " + (w / "sweep.json") + " --out " + (w / "s1"), "RGW_SEED=17").status == 0);
  CHECK(seed_of("s1") == 17);
  REQUIRE(cli("risk-sweep " + (w / "sweep.json") + " --seed 5 --out " + (w / "s2"), "RGW_SEED=17").status == 0);
  CHECK(seed_of("s2") == 5);
  CHECK(slurp(w.path / "s1.csv") != slurp(w.path / "s2.csv"));
  CHECK(cli("risk-sweep " + (w / "sweep.json") + " --out " + (w / "s3"), "RGW_SEED=x").status == 2);
}

TEST_CASE("metric-suite and convergence run") {
  Workdir w;
  CHECK(cli("metric-suite --seed 2").status == 0);
  std::ofstream(w.path / "conv.json") << R"({"family": {"family": "bounded_moment_k", "member": "two_atom"},
    "sweep": {"n_grid": [100, 10000], "trials": 40}})";
  const Run r = cli("convergence " + (w / "conv.json") + " --out " + (w / "conv"));
  CHECK(r.status == 0);
  const auto summary = nlohmann::json::parse(slurp(w.path / "conv.summary.json"));
  CHECK(summary.at("cells").size() == 2);
}

TEST_CASE("pgw at eps 0 byte-matches gw") {
  Workdir w;
  const std::string pair = (w / "a.json") + " " + (w / "b.json") + " --seed 9 --omit-timing";
  const Run g = cli("gw " + pair), p = cli("pgw " + pair + " --eps 0");
  REQUIRE(g.status == 0);
  CHECK(p.out == g.out);
}

TEST_CASE("gw against a point mass gives the closed form") {
  Workdir w;
  std::ofstream(w.path / "pt.json") << R"({"dim": 1, "points": [[0]], "weights": [1]})";
  const Run r = cli("gw " + (w / "a.json") + " " + (w / "pt.json"));
  REQUIRE(r.status == 0);
  // sqrt(sum_ik p_i p_k |x_i - x_k|^4) for atoms 0, 1, 3 with weights 0.2, 0.3, 0.5.
  const double s = 2.0 * (0.2 * 0.3 * 1.0 + 0.2 * 0.5 * 81.0 + 0.3 * 0.5 * 16.0);
  CHECK(nlohmann::json::parse(r.out).at("value").get<double>() == doctest::Approx(std::sqrt(s)).epsilon(1e-12));
  const Run same = cli("gw " + (w / "a.json") + " " + (w / "a.json"));
  CHECK(nlohmann::json::parse(same.out).at("value").get<double>() <= 1e-6);
}

TEST_CASE("contaminate is the identity at eps 0 and far_outlier adds one atom") {
  Workdir w;
  for (const std::string kind : {"far_outlier", "sample_replacement"}) {
    REQUIRE(cli("contaminate " + (w / "a.json") + " --eps 0 --kind " + kind + " --out " + (w / "z.json")).status == 0);
    CHECK(nlohmann::json::parse(slurp(w.path / "z.json")) == nlohmann::json::parse(slurp(w.path / "a.json")));
  }
  REQUIRE(cli("contaminate " + (w / "a.json") + " --eps 0.2 --kind far_outlier --out " + (w / "f.json")).status == 0);
  CHECK(nlohmann::json::parse(slurp(w.path / "f.json")).at("weights").size() == 4);
}
