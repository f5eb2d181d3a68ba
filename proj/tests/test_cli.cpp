// End-to-end tests of the installed command-line interface.  Every case
// shells out to the real binary (path injected by the build) and checks exit
// codes, stream contents, and the documented output schemas.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <json.hpp>

#include "cutofflab/torus.hpp"
#include "cutofflab/rational.hpp"

using namespace cutofflab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path scratch_dir() {
  const fs::path dir = fs::path("cli_scratch");
  fs::create_directories(dir);
  return dir;
}

CliResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path dir = scratch_dir();
  const fs::path out = dir / ("stdout_" + std::to_string(counter) + ".txt");
  const fs::path err = dir / ("stderr_" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string cmd = std::string(CUTOFFLAB_CLI_PATH) + " " + args + " >" +
                          out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  CliResult r;
  if (status != -1 && WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

// Everything except the trailing wall_ms column, which is allowed to vary.
std::string strip_wall_ms(const std::string& csv) {
  std::ostringstream out;
  for (const std::string& line : split_lines(csv)) {
    if (!line.empty() && line[0] != '#') {
      const std::size_t cut = line.rfind(',');
      out << line.substr(0, cut) << "\n";
    } else {
      out << line << "\n";
    }
  }
  return out.str();
}

}  // namespace

TEST_CASE("help and argument errors") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("spectral-tv --help").exit_code == 0);
  const CliResult none = run_cli("");
  CHECK(none.exit_code == 1);
  const CliResult unknown = run_cli("frobnicate");
  CHECK(unknown.exit_code == 1);
}

TEST_CASE("spectral-tv: CSV layout, explicit times, determinism") {
  const std::string args = "spectral-tv --walk dg1xn --n 3 --q 5 --t 1 --t 2";
  const CliResult r = run_cli(args);
  REQUIRE(r.exit_code == 0);
  const std::vector<std::string> lines = split_lines(r.out);
  REQUIRE(lines.size() == 6);  // 3 comments + header + 2 data rows
  CHECK(lines[0].find("# cutofflab spectral-tv schema v1") == 0);
  CHECK(lines[1].find("# walk kind=dg1xn n=3 q=5 m=2") == 0);
  CHECK(lines[3] == "t,l2_bound_sq,l2_tv_bound,exact_tv,lattice_size,wall_ms");
  const std::vector<std::string> row = split_csv(lines[4]);
  REQUIRE(row.size() == 6);
  CHECK(row[0] == "1");
  CHECK_FALSE(row[3].empty());          // exact TV computed
  CHECK(row[4] == "25");                // 5^2 states
  // TV at t=1 for this instance is 0.5833 (frozen by the exact kernel).
  CHECK(std::stod(row[3]) == doctest::Approx(0.583274).epsilon(1e-4));

  const CliResult again = run_cli(args);
  CHECK(strip_wall_ms(r.out) == strip_wall_ms(again.out));
}

TEST_CASE("spectral-tv: grid flags, --no-exact, missing grid") {
  const CliResult grid = run_cli(
      "spectral-tv --walk dg1xn --n 3 --q 5 --t-start 1 --t-stop 4 --t-points 4");
  REQUIRE(grid.exit_code == 0);
  CHECK(split_lines(grid.out).size() == 8);

  const CliResult lean = run_cli(
      "spectral-tv --walk dg1xn --n 3 --q 5 --t 1 --no-exact");
  REQUIRE(lean.exit_code == 0);
  const std::vector<std::string> lines = split_lines(lean.out);
  const std::vector<std::string> row = split_csv(lines[4]);
  REQUIRE(row.size() == 6);
  CHECK(row[3].empty());

  const CliResult missing = run_cli("spectral-tv --walk dg1xn --n 3 --q 5");
  CHECK(missing.exit_code == 1);
  CHECK(missing.err.find("error:") == 0);
}

TEST_CASE("oracle-check: agreement report and budget refusal") {
  const CliResult r =
      run_cli("oracle-check --walk dg1xn --n 3 --q 5 --t 0 --t 1");
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  CHECK(report.at("schema") == "cutofflab-oracle-check-v1");
  CHECK(report.at("all_pass") == true);
  REQUIRE(report.at("rows").size() == 2);
  for (const json& row : report.at("rows")) {
    CHECK(row.at("pass") == true);
    CHECK(row.at("l1").get<double>() <= 1e-9);
    CHECK(row.at("oracle_mass").get<double>() <= 1.0 + 1e-12);
    CHECK(row.at("oracle_mass").get<double>() >= 0.999);
  }

  // 50^3 = 125000 states exceed the documented oracle cap of 1e5.
  const CliResult refused =
      run_cli("oracle-check --walk dg1xn --n 4 --q 50 --t 1");
  CHECK(refused.exit_code == 2);
  CHECK(refused.err.find("budget error:") == 0);
}

TEST_CASE("simulate: schema keys and bitwise-deterministic reruns") {
  const std::string args =
      "simulate --walk dg1xn --n 3 --q 5 --t 1.5 --samples 4000 --seed 3";
  const CliResult r = run_cli(args);
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  CHECK(report.at("schema") == "cutofflab-simulate-v1");
  for (const char* key : {"psi_mean", "psi_var", "psi_ci95", "tv_lower_bound",
                          "exact_psi_mean", "stationary_mean", "stationary_var"}) {
    INFO("key: ", key);
    REQUIRE(report.contains(key));
  }
  CHECK(report.at("stationary_var").get<double>() == 1.0);
  CHECK(report.at("tv_lower_bound").get<double>() >= 0.0);
  CHECK(report.at("tv_lower_bound").get<double>() <= 1.0);
  const double mean = report.at("psi_mean").get<double>();
  const double exact = report.at("exact_psi_mean").get<double>();
  const double ci = report.at("psi_ci95").get<double>();
  CHECK(std::abs(mean - exact) <= 4.0 * ci);

  const CliResult again = run_cli(args);
  CHECK(again.out == r.out);
}

TEST_CASE("lower-bound: defined and undefined regimes") {
  const CliResult r =
      run_cli("lower-bound --walk dg1xn --n 3 --q 5 --samples 3000");
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  CHECK(report.at("schema") == "cutofflab-lower-bound-v1");
  CHECK(report.at("theory_tv_lower").get<double>() == 0.75);
  CHECK(report.at("t_lower").get<double>() < report.at("t_upper").get<double>());
  CHECK(report.at("empirical_tv_lower_bound").get<double>() >= 0.0);
  CHECK(report.at("empirical_tv_lower_bound").get<double>() <= 1.0);

  // (n-1) * gamma = 0.6 <= 1 at n = 2, so the bound time does not exist.
  const CliResult undef = run_cli("lower-bound --walk dg1xn --n 2 --q 5");
  CHECK(undef.exit_code == 1);
  CHECK(undef.err.find("undefined") != std::string::npos);
}

TEST_CASE("theorem-times: family mode and general mode") {
  const CliResult r = run_cli(
      "theorem-times --walk dg1xn --n 8 --q 16 --epsilon 0.25 --epsilon 0.5");
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  CHECK(report.at("schema") == "cutofflab-theorem-times-v1");
  REQUIRE(report.at("rows").size() == 2);
  const json& first = report.at("rows")[0];
  CHECK(first.at("epsilon").get<double>() == 0.25);
  const double alpha = first.at("alpha").get<double>();
  CHECK(alpha > 3000.0);
  CHECK(alpha < 3130.0);
  REQUIRE_FALSE(first.at("t_lower").is_null());
  CHECK(first.at("t_lower").get<double>() < first.at("t_upper").get<double>());

  const CliResult general = run_cli(
      "theorem-times --general --n 3 --q 5 --sigma-sq 1 --r 1 --psi-sup 1 "
      "--epsilon 0.9");
  REQUIRE(general.exit_code == 0);
  const json greport = json::parse(general.out);
  const double galpha = greport.at("rows")[0].at("alpha").get<double>();
  CHECK(galpha == doctest::Approx(2.0767).epsilon(1e-3));

  const CliResult incomplete = run_cli("theorem-times --general --n 3 --q 5");
  CHECK(incomplete.exit_code == 1);
}

TEST_CASE("check-lemmas: bounds hold, comb thresholds reported as data") {
  const CliResult r = run_cli(
      "check-lemmas --max-n 500 --double-max-n 100 --comb-n 5 --comb-c 50");
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  CHECK(report.at("schema") == "cutofflab-check-lemmas-v1");
  CHECK(report.at("all_pass") == true);
  for (const json& row : report.at("sum_lemma")) {
    CHECK(row.at("pass") == true);
    CHECK(row.at("worst_slack").get<double>() >= 0.0);
  }
  CHECK(report.at("double_sum_lemma").at("pass") == true);
  REQUIRE(report.at("comb").at("argmax").size() == 1);
  CHECK(report.at("comb").at("argmax")[0].at("argmax").get<double>() == 0.0);
  REQUIRE(report.at("comb").at("thresholds").size() == 1);
  // N = 5 never produces an off-center grid argmax, so there is no bracket.
  CHECK(report.at("comb").at("thresholds")[0].at("c_star").is_null());
}

TEST_CASE("check-conditions: correlation and decay hold for dg1xn") {
  const CliResult r = run_cli(
      "check-conditions --walk dg1xn --min-n 2 --max-n 6 --q 16");
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  CHECK(report.at("schema") == "cutofflab-check-conditions-v1");
  CHECK(report.at("all_pass") == true);
  REQUIRE(report.at("correlation").size() == 3);  // default alphas 1, 4, 16
  for (const json& row : report.at("correlation")) {
    CHECK(row.at("holds") == true);
    CHECK(row.at("worst_margin").get<double>() >= -1e-12);
    CHECK(row.at("sums").size() == 5);
  }
  REQUIRE(report.at("decay").size() == 5);
  for (const json& row : report.at("decay")) {
    REQUIRE_FALSE(row.contains("skipped"));
    CHECK(row.at("holds") == true);
    CHECK(row.at("far_count").get<std::int64_t>() ==
          row.at("far_count_formula").get<std::int64_t>());
  }
}

TEST_CASE("sweep-cutoff: flags only, config overrides, files and sidecars") {
  SUBCASE("flags-only run prints deterministic CSV") {
    const std::string args =
        "sweep-cutoff --walk dg1xn --n 3 --q 5 --t-start 0 --t-stop 10 "
        "--t-points 5 --mc-samples 800 --seed 3";
    const CliResult r = run_cli(args);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("# cutofflab sweep schema v1") == 0);
    const std::vector<std::string> lines = split_lines(r.out);
    int data_rows = 0;
    for (const std::string& line : lines) {
      if (!line.empty() && line[0] != '#' && line[0] != 'n') ++data_rows;
    }
    CHECK(data_rows == 5);
    const CliResult again = run_cli(args);
    CHECK(again.out == r.out);
  }
  SUBCASE("config file plus a flag override") {
    const fs::path cfg = scratch_dir() / "sweep_config.json";
    std::ofstream(cfg) << R"({
      "walk": {"kind": "dg1xn", "instances": [{"n": 3, "q": 5}]},
      "grid": {"kind": "linear", "start": 0.0, "stop": 10.0, "points": 5},
      "mc_samples": 0
    })";
    const CliResult r =
        run_cli("sweep-cutoff --config " + cfg.string() + " --t-points 3");
    REQUIRE(r.exit_code == 0);
    int data_rows = 0;
    for (const std::string& line : split_lines(r.out)) {
      if (!line.empty() && line[0] != '#' && line[0] != 'n') ++data_rows;
    }
    CHECK(data_rows == 3);
  }
  SUBCASE("--output writes the file plus a metadata sidecar") {
    const fs::path out = scratch_dir() / "sweep_out.csv";
    const CliResult r = run_cli(
        "sweep-cutoff --walk dg1xn --n 3 --q 5 --t-start 0 --t-stop 6 "
        "--t-points 3 --output " + out.string());
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.empty());
    REQUIRE(fs::exists(out));
    CHECK(slurp(out).find("# cutofflab sweep schema v1") == 0);
    const fs::path meta = out.string() + ".meta.json";
    REQUIRE(fs::exists(meta));
    const json sidecar = json::parse(slurp(meta));
    CHECK(sidecar.at("schema") == "cutofflab-meta-v1");
    CHECK(sidecar.contains("version"));
    CHECK(sidecar.contains("command"));
    CHECK(sidecar.contains("written_at"));
    CHECK(sidecar.contains("wall_ms"));
    CHECK(sidecar.at("command").get<std::string>().find("sweep-cutoff") !=
          std::string::npos);
  }
  SUBCASE("unknown config key is rejected") {
    const fs::path cfg = scratch_dir() / "bad_config.json";
    std::ofstream(cfg) << R"({
      "walk": {"kind": "dg1xn", "instances": [{"n": 3, "q": 5}]},
      "grid": {"kind": "linear", "start": 0.0, "stop": 1.0, "points": 2},
      "wat": true
    })";
    const CliResult r = run_cli("sweep-cutoff --config " + cfg.string());
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("unknown key") != std::string::npos);
  }
  SUBCASE("custom walk via an increments file") {
    IncrementDistribution mu;
    mu.q = 7;
    mu.m = 1;
    mu.support = {{{1}, make_rational(1, 2)}, {{-1}, make_rational(1, 2)}};
    const fs::path inc = scratch_dir() / "increments.json";
    std::ofstream(inc) << to_json(mu);
    const CliResult r = run_cli(
        "sweep-cutoff --walk custom --walk-file " + inc.string() +
        " --t-start 0 --t-stop 5 --t-points 3");
    REQUIRE(r.exit_code == 0);
    int data_rows = 0;
    for (const std::string& line : split_lines(r.out)) {
      if (!line.empty() && line[0] != '#' && line[0] != 'n') ++data_rows;
    }
    CHECK(data_rows == 3);
  }
}

TEST_CASE("verify: console summary and JSON slack report") {
  const fs::path out = scratch_dir() / "verify_report.json";
  const CliResult r =
      run_cli("verify --level quick --output " + out.string());
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("[PASS]") != std::string::npos);
  CHECK(r.out.find("checks passed") != std::string::npos);
  CHECK(r.out.find("FAILED") == std::string::npos);
  REQUIRE(fs::exists(out));
  const json report = json::parse(slurp(out));
  CHECK(report.at("all_passed") == true);
  CHECK(report.at("checks").size() >= 20);

  // Negative control through the CLI: exit code 3 and a FAIL line.
  const CliResult tampered = run_cli(
      "verify --level quick --tamper-i 0 --tamper-j 1 --tamper-delta 0.5");
  CHECK(tampered.exit_code == 3);
  CHECK(tampered.out.find("[FAIL] walks.precision_identity") != std::string::npos);
}
