#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "config.hpp"
#include "experiments.hpp"

namespace itemper::app {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "itemper");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("itemper_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }
  std::string out(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

const char* kSmallRun = R"({
  "model": {"name": "curie_weiss_potts", "n": 4, "q": 3, "beta": 1.0},
  "schedule": {"epsilon": 0.5, "v": 0.5},
  "steps": 120,
  "replicas": 6,
  "seed": 9,
  "diagnostics": {"processes": 4, "window": [40, 120], "report_stride": 20}
})";

TEST_F(Cli, BundledBadConfigNamesUnknownKey) {
  const char* configs = std::getenv("ITEMPER_CONFIG_DIR");
  ASSERT_NE(configs, nullptr);
  const auto r = invoke({"run", "--config", (fs::path(configs) / "bad.json").string(), "--out", out("bad")});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("model.detla"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(out("bad")));
}

TEST_F(Cli, ConfigErrorsNameTheKey) {
  const std::vector<std::pair<std::string, std::string>> cases{
      {R"({"model": {"name": "uniform", "n": 3}, "stpes": 4})", "stpes"},
      {R"({"model": {"name": "uniform", "n": 3}, "observe": {"strid": 2}})", "observe.strid"},
      {R"({"model": {"name": "uniform", "n": "three"}})", "model.n"},
      {R"({"model": {"name": "uniform", "n": 3}, "replicas": -1})", "replicas"},
      {R"({"model": {"name": "needle", "n": 5, "delta": 2.0}})", "model"},
      {R"({"model": {"name": "uniform", "n": 3}, "schedule": {"v": 1.0}})", "schedule"},
      {R"({"model": {"name": "potts", "q": 3, "beta": 1, "graph": {"generator": "star", "vertices": 4}}})",
       "model.graph.generator"},
      {R"({"model": {"name": "uniform", "n": 3}, "start": {"kind": "constant", "state": [0, 1]}})", "start"},
      {R"({"experiment": "forget", "model": {"name": "uniform", "n": 3}})", "experiment"},
      {R"({"model": {"name": "uniform", "n": 3}, "kernel": {"type": "gibbs"}})", "kernel"},
      {R"({"model": {"name": "uniform", "n": 3}, "observe": {"coordinates": [7]}})", "observe"},
      {R"({"model": {"name": "uniform", "n": 3}, "steps": 5, "diagnostics": {"window": [0, 9]}})",
       "diagnostics.window"},
      {R"({"model": {"name": "uniform", "n": 3}} trailing)", "--config"},
  };
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto cfg = write("c" + std::to_string(i) + ".json", cases[i].first);
    const auto r = invoke({"run", "--config", cfg.string(), "--out", out("o")});
    EXPECT_EQ(r.code, kExitConfig) << cases[i].first << "\n" << r.err;
    EXPECT_NE(r.err.find(cases[i].second + ":"), std::string::npos) << r.err;
  }
  EXPECT_EQ(invoke({"run", "--config", out("missing.json")}).code, kExitConfig);
  EXPECT_EQ(invoke({"run"}).code, kExitConfig);
  EXPECT_EQ(invoke({"explode", "--config", "x"}).code, kExitConfig);
  EXPECT_EQ(invoke({"--help"}).code, kExitOk);
}

TEST_F(Cli, GuardErrorsExitThree) {
  const auto states = write("s.json", R"({"model": {"name": "needle", "n": 30, "delta": 0.25}, "replicas": 2})");
  auto r = invoke({"lemma-uniform", "--config", states.string(), "--out", out("s")});
  EXPECT_EQ(r.code, kExitGuard) << r.err;
  EXPECT_NE(r.err.find("statistic"), std::string::npos);
  const auto matrix = write("m.json", R"({"model": {"name": "uniform", "n": 13}})");
  r = invoke({"dbar-check", "--config", matrix.string(), "--out", out("m")});
  EXPECT_EQ(r.code, kExitGuard) << r.err;
}

TEST_F(Cli, OutputsAreByteIdenticalAcrossThreadCounts) {
  const auto cfg = write("run.json", kSmallRun);
  const auto a = invoke({"run", "--config", cfg.string(), "--out", out("a"), "--threads", "1"});
  const auto b = invoke({"run", "--config", cfg.string(), "--out", out("b"), "--threads", "3"});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  ASSERT_EQ(b.code, kExitOk) << b.err;
  EXPECT_EQ(a.out, b.out);
  for (const char* file : {"records.csv", "summary.json", "report.csv"}) {
    const auto left = slurp(out("a") + "/" + file);
    EXPECT_FALSE(left.empty());
    EXPECT_EQ(left, slurp(out("b") + "/" + file)) << file;
  }
  const auto c = invoke({"run", "--config", cfg.string(), "--out", out("c"), "--seed", "10"});
  ASSERT_EQ(c.code, kExitOk);
  EXPECT_NE(slurp(out("a") + "/records.csv"), slurp(out("c") + "/records.csv"));
}

TEST_F(Cli, RunOutputsFollowTheFrozenSchema) {
  const auto cfg = write("run.json", kSmallRun);
  const auto r = invoke({"run", "--config", cfg.string(), "--out", out("o")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream records(out("o") + "/records.csv");
  std::string header;
  std::getline(records, header);
  EXPECT_EQ(header, "replica,t,j,statistic,needle_hit,cross_accepts,state");
  std::size_t rows = 0;
  for (std::string line; std::getline(records, line);) ++rows;
  EXPECT_EQ(rows, 6u * 121u * 5u);
  std::ifstream report(out("o") + "/report.csv");
  std::getline(report, header);
  EXPECT_EQ(header, "t,statistic,psrf,tv_bound");
  const auto summary = nlohmann::json::parse(slurp(out("o") + "/summary.json"));
  EXPECT_EQ(summary["schema_version"], kSchemaVersion);
  EXPECT_EQ(summary["experiment"], "run");
  EXPECT_EQ(summary["replicas"], 6);
  EXPECT_EQ(summary["config"]["steps"], 120);
  EXPECT_EQ(summary["schedule"]["horizon"], summary["schedule"]["g0"].get<int>() + 4 * summary["schedule"]["g"].get<int>());
  EXPECT_EQ(summary["summary"].get<std::string>() + "\n", r.out);
}

TEST_F(Cli, ReplicaOverrideExtendsWithoutPerturbing) {
  const auto cfg = write("run.json", kSmallRun);
  ASSERT_EQ(invoke({"run", "--config", cfg.string(), "--out", out("a")}).code, kExitOk);
  ASSERT_EQ(invoke({"run", "--config", cfg.string(), "--out", out("b"), "--replicas", "9"}).code, kExitOk);
  const auto small = slurp(out("a") + "/records.csv");
  const auto large = slurp(out("b") + "/records.csv");
  ASSERT_GT(large.size(), small.size());
  EXPECT_EQ(large.substr(0, small.size()), small);
}

TEST_F(Cli, ForgetSummaryLine) {
  const auto cfg = write("f.json", R"({
    "model": {"name": "curie_weiss_potts", "n": 4, "q": 3, "beta": 1.0},
    "schedule": {"epsilon": 0.25, "v": 0.5},
    "starts": {"x": {"kind": "monochrome", "symbol": 0}, "y": {"kind": "monochrome", "symbol": 2}},
    "replicas": 50, "seed": 4})");
  const auto r = invoke({"forget", "--config", cfg.string(), "--out", out("f")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(std::regex_match(r.out, std::regex(R"(uncoalesced@t_n=[01]\.\d\d \(bound 0\.25\)\n)"))) << r.out;
  std::ifstream records(out("f") + "/records.csv");
  std::string header;
  std::getline(records, header);
  EXPECT_EQ(header, "replica,j,latched,a,b,first_agreement,coalescence_time");
  const auto summary = nlohmann::json::parse(slurp(out("f") + "/summary.json"));
  EXPECT_EQ(summary["results"]["coordinates"].size(), 5u);
}

TEST_F(Cli, NeedleSummaryAndDiagRoundTrip) {
  const auto cfg = write("n.json", R"({
    "model": {"name": "needle", "n": 10, "delta": 0.25, "needle_seed": 3},
    "schedule": {"epsilon": 0.5, "v": 0.9},
    "steps": 400, "replicas": 12, "seed": 8,
    "diagnostics": {"processes": 4, "window": [100, 400]}})");
  const auto r = invoke({"needle", "--config", cfg.string(), "--out", out("n")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(std::regex_match(r.out, std::regex(R"(hits=\d+/12x401, TV>=\d\.\d\d, PSRF=(\d+\.\d\d|inf)\n)"))) << r.out;
  const auto needle = nlohmann::json::parse(slurp(out("n") + "/summary.json"));

  const auto diag = write("d.json", R"({"input": ")" + out("n") + R"(/records.csv",
    "diagnostics": {"processes": 4, "window": [100, 400]}})");
  const auto d = invoke({"diag", "--config", diag.string(), "--out", out("d")});
  ASSERT_EQ(d.code, kExitOk) << d.err;
  const auto report = nlohmann::json::parse(slurp(out("d") + "/summary.json"));
  EXPECT_EQ(report["results"]["psrf"], needle["results"]["psrf"]);
  EXPECT_EQ(report["results"]["coordinate"], 10);

  const auto wrong = write("w.json", R"({"model": {"name": "uniform", "n": 3}})");
  const auto w = invoke({"needle", "--config", wrong.string(), "--out", out("w")});
  EXPECT_EQ(w.code, kExitConfig);
  EXPECT_NE(w.err.find("model.name"), std::string::npos);
}

TEST_F(Cli, LemmaUniformAndDbarCheck) {
  const auto cfg = write("l.json", R"({
    "model": {"name": "uniform", "n": 2, "q": 2},
    "schedule": {"epsilon": 0.5, "v": 0.5, "c_override": 0.5},
    "observe": {"times": [3, 9]}, "replicas": 800, "seed": 1})");
  auto r = invoke({"lemma-uniform", "--config", cfg.string(), "--out", out("l")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("over 6 marginals"), std::string::npos) << r.out;
  const auto dbar = write("b.json", R"({"model": {"name": "needle", "n": 3, "delta": 0.5},
    "kernel": {"type": "metropolis", "level": 3}, "steps": 30})");
  r = invoke({"dbar-check", "--config", dbar.string(), "--out", out("b")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("holds"), std::string::npos) << r.out;
  const auto summary = nlohmann::json::parse(slurp(out("b") + "/summary.json"));
  EXPECT_TRUE(summary["results"]["holds"].get<bool>());
}

TEST_F(Cli, CoupleWritesPerTimeReport) {
  const auto cfg = write("c.json", R"({
    "model": {"name": "ising", "graph": {"generator": "cycle", "vertices": 5}, "beta": 0.3},
    "starts": {"x": {"kind": "monochrome", "symbol": 0}, "y": {"kind": "uniform"}},
    "steps": 60, "replicas": 10, "seed": 2})");
  const auto r = invoke({"couple", "--config", cfg.string(), "--out", out("c")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream report(out("c") + "/report.csv");
  std::size_t rows = 0;
  for (std::string line; std::getline(report, line);) ++rows;
  EXPECT_EQ(rows, 62u);
}

TEST_F(Cli, GraphFilesResolveAgainstTheConfig) {
  write("g.edges", "# triangle plus tail\n0 1\n1 2\n2 0\n2 3\n");
  const auto cfg = write("g.json", R"({"model": {"name": "ising", "graph": {"file": "g.edges"}, "beta": 0.5},
    "steps": 5})");
  const auto parsed = load_config(cfg, "run");
  const auto model = build_model(*parsed.model);
  EXPECT_EQ(std::get<IsingModel>(model).size(), 4u);
}

TEST(Format, NumbersRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(2.0), "2");
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_fixed(0.2345, 2), "0.23");
  EXPECT_EQ(format_fixed(1.0, 2), "1.00");
  const double x = 0.7569379516309819;
  EXPECT_EQ(std::stod(format_number(x)), x);
}

}  // namespace
}  // namespace itemper::app
