#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("mcomp_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Run cli(const std::string& args) {
  static int counter = 0;
  const auto err = scratch() / ("stderr_" + std::to_string(counter++) + ".txt");
  const std::string cmd = std::string(MCOMP_CLI_PATH) + " " + args + " 2>" + err.string();
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

std::string config(const std::string& name) { return std::string(MCOMP_CONFIG_DIR) + "/" + name; }

fs::path write_config(const std::string& name, const std::string& text) {
  const auto p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double lognormal_call(double s, double k, double vol) {
  const double d1 = (std::log(s / k) + 0.5 * vol * vol) / vol;
  return s * norm_cdf(d1) - k * norm_cdf(d1 - vol);
}

/// Rows of a "t,x1,x2,v" file.
std::vector<std::array<double, 4>> read_value_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::array<double, 4>> rows;
  while (std::getline(in, line)) {
    std::array<double, 4> r{};
    std::stringstream s(line);
    std::string cell;
    for (int i = 0; i < 4 && std::getline(s, cell, ','); ++i) r[i] = std::stod(cell);
    rows.push_back(r);
  }
  return rows;
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<std::string> na, nb;
  for (const auto& e : fs::directory_iterator(a)) na.push_back(e.path().filename().string());
  for (const auto& e : fs::directory_iterator(b)) nb.push_back(e.path().filename().string());
  std::sort(na.begin(), na.end());
  std::sort(nb.begin(), nb.end());
  if (na != nb || na.empty()) return false;
  for (const auto& n : na)
    if (slurp(a / n) != slurp(b / n)) return false;
  return true;
}

}  // namespace

TEST(CliConfig, NegativeStrikeIsConfigError) {
  const auto r = cli("validate --config " + config("negative_strike.json") + " --out " + (scratch() / "neg").string());
  EXPECT_EQ(r.code, 2);
  const auto e = json::parse(r.err);
  EXPECT_EQ(e["exit_code"], 2);
  EXPECT_EQ(e["error"]["where"], "/model/strike");
}

TEST(CliConfig, UnknownKeyNamesPointer) {
  const auto p = write_config("unknown.json", R"({"model": {"kind": "lognormal", "nu": 0.2, "strik": 1.0}})");
  const auto r = cli("price --config " + p.string() + " --out " + (scratch() / "unk").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.err)["error"]["where"], "/model/strik");
}

TEST(CliConfig, MalformedJsonAndMissingFile) {
  const auto p = write_config("broken.json", R"({"model": )");
  EXPECT_EQ(cli("price --config " + p.string()).code, 2);
  EXPECT_EQ(cli("price --config " + (scratch() / "absent.json").string()).code, 2);
}

TEST(CliConfig, BadFlagsAreConfigErrors) {
  EXPECT_EQ(cli("price --config " + config("constant_vol.json") + " --workers 0").code, 2);
  EXPECT_EQ(cli("price --config " + config("constant_vol.json") + " --format xml").code, 2);
  EXPECT_EQ(cli("hedge --config " + config("constant_vol.json") + " --target swaption").code, 2);
  EXPECT_EQ(cli("--bogus").code, 2);
}

TEST(CliValidate, SigmaFloorZeroFailsAssumption) {
  const auto dir = scratch() / "floor";
  const auto r = cli("validate --config " + config("sigma_floor_zero.json") + " --out " + dir.string());
  EXPECT_EQ(r.code, 1);
  const auto v = read_json(dir / "validation.json");
  EXPECT_FALSE(v["passed"].get<bool>());
  bool a1 = false;
  const auto summary = json::parse(r.out);
  for (const auto& id : summary["failing_rows"]) a1 = a1 || id.get<std::string>().rfind("A1.", 0) == 0;
  EXPECT_TRUE(a1);
}

TEST(CliValidate, ReferencePassesWithHeuristicSection) {
  const auto dir = scratch() / "validate_ref";
  const auto r = cli("validate --config " + config("reference_quick.json") + " --out " + dir.string());
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  const auto v = read_json(dir / "validation.json");
  EXPECT_TRUE(v["passed"].get<bool>());
  EXPECT_EQ(v["plausibility"]["label"], "HEURISTIC");
  EXPECT_EQ(v["analytic_envelope"].size(), 3u);
  for (const auto& e : v["analytic_envelope"]) EXPECT_TRUE(e["passed"].get<bool>());
}

TEST(CliPrice, ConstantVolMatchesLognormalCall) {
  const auto dir = scratch() / "cv";
  const auto r = cli("price --config " + config("constant_vol.json") + " --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const double want = lognormal_call(1.0, 1.0, 0.2);
  const double got = read_json(dir / "price_summary.json")["price_at_x0"];
  EXPECT_LE(std::abs(got - want), 5e-3 * want);
  int checked = 0;
  for (const auto& row : read_value_csv(dir / "price.csv"))
    if (row[0] == 0.0 && std::abs(row[1]) <= 0.3) {
      ++checked;
      EXPECT_NEAR(row[3], lognormal_call(std::exp(row[1]), 1.0, 0.2), 5e-3 * want) << row[1] << ' ' << row[2];
    }
  EXPECT_GT(checked, 0);
}

TEST(CliPrice, UnitPayoffIsOneEverywhere) {
  const auto dir = scratch() / "unit";
  const auto r = cli("price --config " + config("unit_payoff.json") + " --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_value_csv(dir / "price.csv");
  ASSERT_FALSE(rows.empty());
  double worst = 0.0;
  for (const auto& row : rows) worst = std::max(worst, std::abs(row[3] - 1.0));
  EXPECT_LE(worst, 1e-12);
}

TEST(CliPrice, JsonFormat) {
  const auto dir = scratch() / "cv_json";
  ASSERT_EQ(cli("price --config " + config("unit_payoff.json") + " --format json --out " + dir.string()).code, 0);
  EXPECT_TRUE(fs::exists(dir / "price.json"));
  EXPECT_FALSE(fs::exists(dir / "price.csv"));
  EXPECT_NO_THROW(read_json(dir / "price.json"));
}

TEST(CliComplete, Verdicts) {
  const auto ind = cli("complete --config " + config("independent.json") + " --out " + (scratch() / "ind").string());
  EXPECT_EQ(ind.code, 0);
  EXPECT_EQ(json::parse(ind.out)["verdict"], "complete_via_rank");

  const auto cv = cli("complete --config " + config("constant_vol.json") + " --out " + (scratch() / "cvc").string());
  EXPECT_EQ(cv.code, 1);
  EXPECT_EQ(json::parse(cv.out)["verdict"], "inconclusive");

  const auto dir = scratch() / "refc";
  const auto ref = cli("complete --config " + config("reference_quick.json") + " --out " + dir.string());
  EXPECT_EQ(ref.code, 0);
  EXPECT_EQ(json::parse(ref.out)["verdict"], "complete_via_pairing");
  EXPECT_TRUE(fs::exists(dir / "verdict.json"));
}

TEST(CliHedge, CallIsReplicatedExactly) {
  const auto dir = scratch() / "hedge_call";
  const auto r = cli("hedge --target call --config " + config("reference_quick.json") + " --out " + dir.string());
  ASSERT_NE(r.code, 2) << r.err;
  const auto s = json::parse(r.out);
  EXPECT_LE(s["rmse"].get<double>(), 1e-10);
  EXPECT_TRUE(fs::exists(dir / "hedge_report.json"));
  EXPECT_TRUE(fs::exists(dir / "hedge_errors.csv"));
}

TEST(CliHedge, ForwardAndPutAgreeByParity) {
  const auto f = cli("hedge --target forward --config " + config("reference_quick.json") + " --out " +
                     (scratch() / "hf").string());
  const auto p = cli("hedge --target put --config " + config("reference_quick.json") + " --out " +
                     (scratch() / "hp").string());
  const double rf = json::parse(f.out)["rmse"], rp = json::parse(p.out)["rmse"];
  EXPECT_GT(rf, 0.0);
  EXPECT_NEAR(rf, rp, 1e-8 * rf);
}

TEST(CliHedge, DeterministicAcrossRerunsAndWorkers) {
  const std::string base = "hedge --target digital --config " + config("reference_quick.json");
  const auto a = scratch() / "det_a", b = scratch() / "det_b", c = scratch() / "det_c";
  cli(base + " --workers 1 --out " + a.string());
  cli(base + " --workers 1 --out " + b.string());
  cli(base + " --workers 3 --out " + c.string());
  EXPECT_TRUE(same_tree(a, b));
  EXPECT_TRUE(same_tree(a, c));
}

TEST(CliHedge, SeedOverrideChangesPaths) {
  const std::string base = "hedge --target digital --config " + config("reference_quick.json");
  const auto a = scratch() / "seed_a", b = scratch() / "seed_b";
  cli(base + " --out " + a.string());
  cli(base + " --seed 8 --out " + b.string());
  EXPECT_NE(slurp(a / "hedge_errors.csv"), slurp(b / "hedge_errors.csv"));
  EXPECT_EQ(read_json(b / "hedge_report.json")["seed"], 8);
}

TEST(CliHedge, JsonTables) {
  const auto dir = scratch() / "hedge_json";
  cli("hedge --target digital --format json --config " + config("reference_quick.json") + " --out " + dir.string());
  const auto conv = read_json(dir / "hedge_convergence.json");
  ASSERT_EQ(conv.size(), 3u);
  EXPECT_EQ(conv[0]["n_steps"], 16);
  EXPECT_TRUE(fs::exists(dir / "hedge_errors.json"));
}

TEST(CliFlagship, WritesBundle) {
  const auto dir = scratch() / "flagship";
  const auto r = cli("flagship --config " + config("reference_quick.json") + " --out " + dir.string());
  ASSERT_NE(r.code, 2) << r.err;
  const auto s = json::parse(r.out);
  EXPECT_EQ(s["verdict"], "complete_via_pairing");
  EXPECT_GT(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}), 3);
}
