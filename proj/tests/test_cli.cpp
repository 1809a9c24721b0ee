#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "commands.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun rcm_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = rcm::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

double json_value(const std::string& text) { return nlohmann::json::parse(text).at("value").get<double>(); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("rcm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, ComputeExamples) {
  CliRun r = rcm_cli({"compute", "conductance", "--d", "2", "--n", "4", "--dist", "constant:1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(json_value(r.out), 2.0, 1e-10);
  r = rcm_cli({"compute", "diffusion", "--d", "1", "--n", "4", "--weights", "1,2,1,2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(json_value(r.out), 8.0 / 9.0, 1e-10);
  r = rcm_cli({"compute", "spectral", "--d", "1", "--n", "3", "--dist", "constant:1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(json_value(r.out), 1 - std::cos(std::acos(-1.0) / 4), 1e-10);
  r = rcm_cli({"compute", "green", "--d", "2", "--x", "0,0", "--y", "2,1", "--potential", "constant:1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j.at("converged").get<bool>());
  EXPECT_LE(j.at("last_visit").at("gap").get<double>(), 1e-8);
}

TEST_F(CliTest, GenEnvIsDeterministicAndLoadable) {
  const std::vector<std::string> args{"gen-env", "--d", "3", "--n", "4", "--dist", "uniform-elliptic:2", "--seed", "1", "-o"};
  auto a = args, b = args;
  a.push_back(path("a.env"));
  b.push_back(path("b.env"));
  const CliRun r = rcm_cli(a);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("min"), std::string::npos);
  ASSERT_EQ(rcm_cli(b).code, 0);
  EXPECT_EQ(slurp(path("a.env")), slurp(path("b.env")));
  const CliRun c = rcm_cli({"compute", "conductance", "--env", path("a.env")});
  ASSERT_EQ(c.code, 0) << c.err;
  const double f = json_value(c.out);
  EXPECT_GE(f, 1.0);
  EXPECT_LE(f, 4.0);
  // a closed box cannot feed the corrector
  EXPECT_EQ(rcm_cli({"compute", "diffusion", "--env", path("a.env")}).code, 2);
}

TEST_F(CliTest, ExitCodes) {
  const CliRun bad = rcm_cli({"gen-env", "--d", "3", "--n", "8", "--dist", "power-low-tail:2,1", "-o", path("x")});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("0<gamma<2"), std::string::npos);
  EXPECT_EQ(rcm_cli({}).code, 2);
  EXPECT_EQ(rcm_cli({"compute", "nothing"}).code, 2);
  EXPECT_EQ(rcm_cli({"compute", "spectral", "--env", path("missing")}).code, 2);
  EXPECT_EQ(rcm_cli({"compute", "diffusion", "--d", "2", "--n", "8", "--dist", "uniform-elliptic:2", "--tol", "1e-300"}).code,
            3);
  EXPECT_EQ(rcm_cli({"--help"}).code, 0);
}

TEST_F(CliTest, SweepOutputsAndDeterminism) {
  {
    std::ofstream cfg(path("c.cfg"));
    cfg << "version = 1\nquantity = effective_conductance\nd = 2\nn_list = 3,4,6\nsamples = 8\n"
           "dist = two-point:0.5,0.5,2\nmaster_seed = 7\noutput = cond\n";
  }
  const CliRun one = rcm_cli({"sweep", "--config", path("c.cfg"), "--out-dir", path("one"), "--plot"});
  ASSERT_EQ(one.code, 0) << one.err;
  const CliRun four = rcm_cli({"sweep", "--config", path("c.cfg"), "--out-dir", path("four"), "--plot", "--threads", "4"});
  ASSERT_EQ(four.code, 0) << four.err;
  for (const char* f : {"cond.csv", "cond.summary.json", "cond_variance.svg"})
    EXPECT_EQ(slurp(dir_ / "one" / f), slurp(dir_ / "four" / f)) << f;
  const std::string csv = slurp(dir_ / "one" / "cond.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), rcm::kCsvHeader);
  const auto summary = nlohmann::json::parse(slurp(dir_ / "one" / "cond.summary.json"));
  EXPECT_EQ(summary.at("levels").size(), 3u);
  EXPECT_TRUE(summary.at("fit").contains("slope"));

  // flags override the file
  const CliRun cst = rcm_cli({"sweep", "--config", path("c.cfg"), "--out-dir", path("cst"), "--set", "dist=constant:1"});
  ASSERT_EQ(cst.code, 0) << cst.err;
  for (const auto& l : nlohmann::json::parse(slurp(dir_ / "cst" / "cond.summary.json")).at("levels"))
    EXPECT_EQ(l.at("var").get<double>(), 0.0);

  const CliRun printed = rcm_cli({"sweep", "--config", path("c.cfg"), "--print-config", "--set", "samples=3"});
  ASSERT_EQ(printed.code, 0);
  EXPECT_EQ(rcm::parse_sweep_config(printed.out).samples, 3);
}

TEST_F(CliTest, SweepErrors) {
  {
    std::ofstream cfg(path("c.cfg"));
    cfg << "version = 1\nd = 2\nn_list = 6\nsamples = 4\nshape = round\n";
  }
  EXPECT_EQ(rcm_cli({"sweep", "--config", path("c.cfg")}).code, 2);
  EXPECT_EQ(rcm_cli({"sweep", "--set", "n_list=4,2"}).code, 2);
  const CliRun fail = rcm_cli({"sweep", "--set", "d=2", "--set", "n_list=6", "--set", "samples=4", "--set", "tol=1e-300",
                            "--out-dir", path("fail")});
  EXPECT_EQ(fail.code, 4);
  EXPECT_TRUE(fs::exists(dir_ / "fail" / "sweep.csv"));
}
