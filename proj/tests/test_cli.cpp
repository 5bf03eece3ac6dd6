#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hqrb/cli.hpp"

using namespace hqrb;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("hqrb_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

constexpr const char* kSmallConfig = R"({
  "noise": {"model": "qsg", "sigma_t_ps": 50, "sigma_j_neV": 30},
  "rb": {"n_grid": [1, 5, 10, 20, 40], "n_seq": 12, "n_rep": 2, "seed": 7}
})";

std::string small_config(const TempDir& dir, const std::string& extra_rb = "") {
  std::string text = kSmallConfig;
  if (!extra_rb.empty()) text.replace(text.find("\"seed\": 7"), 9, "\"seed\": 7, " + extra_rb);
  const std::string path = dir / "config.json";
  write_file(path, text);
  return path;
}

}  // namespace

TEST(Cli, NoSubcommandIsValidationError) {
  EXPECT_EQ(cli({}).code, kExitValidation);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitValidation);
}

TEST(Cli, HelpSucceeds) {
  const auto r = cli({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("calibrate-ez"), std::string::npos);
}

TEST(Cli, SynthRzPrintsThreeSteps) {
  const auto r = cli({"synth", "--gate", "rz", "--theta", "3.141592653589793", "--e-z", "0.2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  const auto pos = line.find("total_ns=");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_NEAR(std::stod(line.substr(pos + 9)), 5.6593, 1e-4);
  std::getline(in, line);
  EXPECT_EQ(line, "step,j1_ueV,j2_ueV,j_ueV,duration_ns");
  std::vector<double> durations;
  while (std::getline(in, line)) durations.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  ASSERT_EQ(durations.size(), 3u);
  std::sort(durations.begin(), durations.end());
  EXPECT_NEAR(durations[0], 0.76183, 1e-5);
  EXPECT_NEAR(durations[1], 0.76183, 1e-5);
  EXPECT_NEAR(durations[2], 4.13567, 1e-5);
}

TEST(Cli, SynthRejectsUnknownGate) {
  const auto r = cli({"synth", "--gate", "cnot"});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, UnknownConfigKeyIsValidationErrorNamingPath) {
  TempDir dir;
  const std::string path = dir / "bad.json";
  write_file(path, R"({"noise": {"foo": 1}})");
  const auto r = cli({"run", "--config", path, "--out", dir / "out"});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("/noise/foo"), std::string::npos) << r.err;
}

TEST(Cli, MissingConfigFileIsValidationError) {
  TempDir dir;
  EXPECT_EQ(cli({"run", "--config", dir / "none.json", "--out", dir / "out"}).code, kExitValidation);
}

TEST(Cli, UnwritableOutputIsRuntimeFailure) {
  TempDir dir;
  const std::string cfg = small_config(dir);
  write_file(dir / "blocker", "x");
  const auto r = cli({"run", "--config", cfg, "--out", dir / "blocker/sub"});
  EXPECT_EQ(r.code, kExitRuntime) << r.err;
}

TEST(Cli, RunWritesDecayAndFitWithProvenance) {
  TempDir dir;
  const std::string cfg = small_config(dir);
  const auto r = cli({"run", "--config", cfg, "--out", dir / "out"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string csv = read_file(dir / "out/decay.csv");
  const std::string hash = config_hash(load_run_config(cfg));
  EXPECT_TRUE(csv.starts_with("# hqrb decay config_hash=" + hash + " seed=7\n"));
  const DecayTable t = parse_decay_csv(csv);
  ASSERT_EQ(t.rows.size(), 5u);
  EXPECT_EQ(t.rows.front().point.samples, 12u * 2u * 6u);
  const auto fit = nlohmann::json::parse(read_file(dir / "out/fit.json"));
  EXPECT_EQ(fit["provenance"]["config_hash"], hash);
  EXPECT_EQ(fit["provenance"]["seed"], 7);
  EXPECT_FALSE(fs::exists(dir / "out/irb.json"));
}

TEST(Cli, FitOnRunOutputReproducesFitJson) {
  TempDir dir;
  const std::string cfg = small_config(dir);
  ASSERT_EQ(cli({"run", "--config", cfg, "--out", dir / "out"}).code, kExitOk);
  const auto r = cli({"fit", dir / "out/decay.csv"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out, read_file(dir / "out/fit.json"));
}

TEST(Cli, RunIsByteIdenticalAcrossRepeatsAndThreadCounts) {
  TempDir dir;
  const std::string cfg = small_config(dir);
  ASSERT_EQ(cli({"run", "--config", cfg, "--out", dir / "a", "--threads", "1"}).code, kExitOk);
  ASSERT_EQ(cli({"run", "--config", cfg, "--out", dir / "b", "--threads", "1"}).code, kExitOk);
  ASSERT_EQ(cli({"run", "--config", cfg, "--out", dir / "c", "--threads", "3"}).code, kExitOk);
  const std::string a = read_file(dir / "a/decay.csv");
  EXPECT_EQ(a, read_file(dir / "b/decay.csv"));
  EXPECT_EQ(a, read_file(dir / "c/decay.csv"));
  EXPECT_EQ(read_file(dir / "a/fit.json"), read_file(dir / "c/fit.json"));
}

TEST(Cli, SeedOverrideChangesResultsAndProvenance) {
  TempDir dir;
  const std::string cfg = small_config(dir);
  ASSERT_EQ(cli({"run", "--config", cfg, "--out", dir / "a"}).code, kExitOk);
  ASSERT_EQ(cli({"run", "--config", cfg, "--out", dir / "b", "--seed", "8"}).code, kExitOk);
  const std::string b = read_file(dir / "b/decay.csv");
  EXPECT_NE(read_file(dir / "a/decay.csv"), b);
  EXPECT_NE(b.find(" seed=8\n"), std::string::npos);
}

TEST(Cli, InterleavedRunWritesIrbJson) {
  TempDir dir;
  const std::string cfg = small_config(dir, R"("interleave": "x")");
  ASSERT_EQ(cli({"run", "--config", cfg, "--out", dir / "out"}).code, kExitOk);
  const DecayTable t = parse_decay_csv(read_file(dir / "out/decay.csv"));
  EXPECT_EQ(t.interleave_labels(), (std::vector<std::string>{"none", "x"}));
  const std::string irb = read_file(dir / "out/irb.json");
  const auto j = nlohmann::json::parse(irb);
  for (const char* k : {"p", "p_i", "eps", "bound_e", "interval"}) EXPECT_TRUE(j.contains(k)) << k;
  const auto r = cli({"fit", dir / "out/decay.csv"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out, irb);
}

TEST(Cli, FitOnBundledSyntheticFixture) {
  const std::string fixture = std::string(HQRB_SOURCE_DIR) + "/tests/data/synthetic_decay.csv";
  TempDir dir;
  const auto r = cli({"fit", fixture, "--out", dir / "fit.json"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(read_file(dir / "fit.json"));
  EXPECT_NEAR(j["p"].get<double>(), 0.99, 1e-6);
  EXPECT_NEAR(j["f_a"].get<double>(), 0.5, 1e-6);
  EXPECT_NEAR(j["f_b"].get<double>(), 0.5, 1e-6);
  EXPECT_TRUE(j["converged"].get<bool>());
}

TEST(Cli, FitRejectsMalformedCsv) {
  TempDir dir;
  write_file(dir / "bad.csv", "n,f\n1,0.9\n");
  EXPECT_EQ(cli({"fit", dir / "bad.csv"}).code, kExitValidation);
}

TEST(Cli, SweepWritesGrid) {
  TempDir dir;
  const std::string cfg = dir / "sweep.json";
  write_file(cfg, R"({"rb": {"n_grid": [1, 5, 10, 20], "n_seq": 6, "n_rep": 2},
                      "sweep": {"sigma_t_ps": [10, 50], "sigma_j_neV": [20]}})");
  const auto r = cli({"sweep", "--config", cfg, "--out", dir / "sweep.csv"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string csv = read_file(dir / "sweep.csv");
  EXPECT_NE(csv.find(std::string(kSweepHeader) + "\n"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(Cli, NoiseCheckWritesTraceAndPeriodogram) {
  TempDir dir;
  const auto r = cli({"noise-check", "--sigma-j", "20", "--out", dir / "nc", "--seed", "3"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string trace = read_file(dir / "nc/trace.csv");
  const std::string psd = read_file(dir / "nc/psd.csv");
  EXPECT_NE(trace.find("\nt_ns,value_neV\n0,"), std::string::npos);
  EXPECT_NE(psd.find("\nf_hz,psd\n"), std::string::npos);
  EXPECT_TRUE(trace.starts_with("# hqrb noise_trace config_hash="));
  EXPECT_NE(trace.find(" seed=3\n"), std::string::npos);
  EXPECT_EQ(cli({"noise-check", "--segment", "2", "--out", dir / "nc2"}).code, kExitValidation);
}

TEST(Cli, CalibrateEzWritesValidReport) {
  TempDir dir;
  const auto r = cli({"calibrate-ez", "--grid", "32", "--out", dir / "cal.json"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(validate_calibration_json(read_file(dir / "cal.json")), "");
  EXPECT_EQ(cli({"calibrate-ez", "--grid", "8"}).code, kExitValidation);
  EXPECT_EQ(cli({"calibrate-ez", "--model", "exact"}).code, kExitValidation);
}

TEST(Cli, BinaryExitCodes) {
  const std::string bin = HQRB_CLI_PATH;
  ASSERT_TRUE(fs::exists(bin));
  auto status = [&](const std::string& args) {
    const int s = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(s);
  };
  EXPECT_EQ(status("synth --gate h"), 0);
  EXPECT_EQ(status("synth --gate nope"), 2);
  EXPECT_EQ(status("fit /nonexistent.csv"), 2);
}
