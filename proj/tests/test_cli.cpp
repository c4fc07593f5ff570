#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::path(FERMI_TEST_DIR) / "cli";

struct Run {
  int status = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path write_config(const std::string& name, const std::string& body) {
  fs::create_directories(kWork);
  const auto path = kWork / (name + ".json");
  std::ofstream(path, std::ios::binary) << body;
  return path;
}

Run run(const std::string& args) {
  fs::create_directories(kWork);
  const auto capture = kWork / "stdout.txt";
  const std::string cmd = std::string(FERMI_SPECTRA_EXE) + " " + args + " > " + capture.string() + " 2> " +
                          (kWork / "stderr.txt").string();
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(capture);
  return r;
}

std::map<std::string, std::string> fields(const std::string& report) {
  std::map<std::string, std::string> m;
  std::istringstream in(report);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) m[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

const char* kRectangle = R"({"curve": {"curvature": {"L": 3.141592653589793, "k": "0"}}, "width": "0.4", "p": 2})";

}  // namespace

TEST(Cli, CertifyRectangle) {
  const auto cfg = write_config("rect", kRectangle);
  const auto r = run("certify --config " + cfg.string());
  ASSERT_EQ(r.status, 0);
  const auto f = fields(r.out);
  EXPECT_EQ(f.at("schema"), "1");
  EXPECT_EQ(f.at("certificate.certified"), "true");
  EXPECT_EQ(f.at("certificate.threshold"), "1.5625");
  EXPECT_EQ(f.at("certificate.case"), "a");
  EXPECT_TRUE(f.count("config_hash"));
  EXPECT_TRUE(f.count("grid.samples"));
  EXPECT_TRUE(f.count("tolerance.concavity"));
}

TEST(Cli, BoundsNameEveryConstant) {
  const auto cfg = write_config("rect", kRectangle);
  const auto r = run("bounds --config " + cfg.string());
  ASSERT_EQ(r.status, 0);
  const auto f = fields(r.out);
  for (const char* key : {"constant.pi_p", "constant.A_p", "constant.B_p", "constant.L", "bound.constant_width.value",
                          "bound.constant_width.applicable", "bound.variable_width.value", "bound.lyapunov_1d.value"})
    EXPECT_TRUE(f.count(key)) << key;
  EXPECT_EQ(f.at("bound.constant_width.value"), "1");
  EXPECT_EQ(f.at("upper.test_function.label"), "rigorous");
}

TEST(Cli, FailedHypothesisIsNotAnError) {
  const auto cfg = write_config("convex", R"({"curve": {"curvature": {"L": 3, "k": "0.2*(s - L/2)^2 - 0.3"}},
                                              "width": "0.3", "p": 3})");
  const auto r = run("bounds --config " + cfg.string());
  ASSERT_EQ(r.status, 0);
  const auto f = fields(r.out);
  EXPECT_EQ(f.at("bound.constant_width.applicable"), "false");
  EXPECT_EQ(f.at("upper.test_function.label"), "extension");
}

TEST(Cli, FlagsOverrideConfig) {
  const auto cfg = write_config("rect", kRectangle);
  const auto r = run("certify --config " + cfg.string() + " --ns 64 --nt 8 --p 3");
  ASSERT_EQ(r.status, 0);
  const auto f = fields(r.out);
  EXPECT_EQ(f.at("grid.mesh_ns"), "64");
  EXPECT_EQ(f.at("grid.mesh_nt"), "8");
  EXPECT_EQ(f.at("p"), "3");
}

TEST(Cli, ReportsAreByteIdentical) {
  const auto cfg = write_config("rect", kRectangle);
  const auto a = kWork / "det_a", b = kWork / "det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  ASSERT_EQ(run("solve1d --config " + cfg.string() + " --out " + a.string()).status, 0);
  ASSERT_EQ(run("solve1d --config " + cfg.string() + " --out " + b.string()).status, 0);
  EXPECT_EQ(slurp(a / "report.txt"), slurp(b / "report.txt"));
  EXPECT_EQ(slurp(a / "eigenfunction.csv"), slurp(b / "eigenfunction.csv"));
  EXPECT_FALSE(slurp(a / "report.txt").empty());
}

TEST(Cli, Figure2Csv) {
  const auto cfg = write_config("fig", R"({"command": "figure2"})");
  const auto dir = kWork / "fig";
  fs::remove_all(dir);
  ASSERT_EQ(run("figure2 --config " + cfg.string() + " --out " + dir.string()).status, 0);
  const auto csv = slurp(dir / "figure2.csv");
  EXPECT_EQ(first_line(csv), "x,r,b,b_minus_r");
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    const double gap = std::stod(line.substr(line.rfind(',') + 1));
    EXPECT_GT(gap, 0.0) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 500);
  EXPECT_EQ(first_line(slurp(dir / "figure2_r.csv")), "x,r");
  EXPECT_EQ(first_line(slurp(dir / "figure2_b.csv")), "x,b");
}

TEST(Cli, SweepMarksInvalidEpsilon) {
  const auto cfg = write_config("sweep", R"({"curve": {"curvature": {"L": 3.141592653589793, "k": "-0.5"}},
                                             "width": "1", "epsilons": [3.0, 0.2], "mesh": {"ns": 32, "nt": 8}})");
  const auto dir = kWork / "sweep";
  fs::remove_all(dir);
  const auto r = run("sweep --config " + cfg.string() + " --out " + dir.string());
  ASSERT_EQ(r.status, 0);
  const auto f = fields(r.out);
  EXPECT_EQ(f.at("sweep.point.0.ok"), "false");
  EXPECT_EQ(f.at("sweep.point.1.ok"), "true");
  EXPECT_EQ(f.at("sweep.policy.nt"), "16");
  const auto csv = slurp(dir / "sweep.csv");
  EXPECT_EQ(first_line(csv), "epsilon,mu,mu_star,rel_err");
  EXPECT_NE(csv.find("\n3,,"), std::string::npos);
}

TEST(Cli, Solve2dWritesField) {
  const auto cfg = write_config("rect", kRectangle);
  const auto dir = kWork / "s2d";
  fs::remove_all(dir);
  const auto r = run("solve2d --config " + cfg.string() + " --ns 32 --nt 8 --out " + dir.string());
  ASSERT_EQ(r.status, 0);
  const auto f = fields(r.out);
  EXPECT_NEAR(std::stod(f.at("solve2d.full.mu")), 1.0, 5e-3);
  EXPECT_EQ(f.at("solve2d.full.kind"), "eigenvalue");
  EXPECT_EQ(first_line(slurp(dir / "solve2d_full.csv")), "s,t,x,y,u");
}

TEST(Cli, UsageAndConfigErrorsExitOne) {
  const auto cfg = write_config("rect", kRectangle);
  EXPECT_EQ(run("certify").status, 1);
  EXPECT_EQ(run("frobnicate --config " + cfg.string()).status, 1);
  EXPECT_EQ(run("certify --config " + (kWork / "nope.json").string()).status, 1);
  const auto bad_p = write_config("badp", R"({"curve": {"curvature": {"L": 3, "k": "0"}}, "width": "0.4", "p": 0.5})");
  EXPECT_EQ(run("bounds --config " + bad_p.string()).status, 1);
  const auto bad_expr = write_config("badexpr", R"({"curve": {"curvature": {"L": 3, "k": "sin("}}, "width": "0.4"})");
  EXPECT_EQ(run("bounds --config " + bad_expr.string()).status, 1);
  const auto no_width = write_config("nowidth", R"({"curve": {"curvature": {"L": 3, "k": "0"}}})");
  EXPECT_EQ(run("certify --config " + no_width.string()).status, 1);
}

TEST(Cli, SolverErrorsExitTwo) {
  const auto cfg = write_config("fold", R"({"curve": {"curvature": {"L": 3.141592653589793, "k": "-1"}}, "width": "1.2"})");
  EXPECT_EQ(run("solve2d --config " + cfg.string() + " --ns 16 --nt 8").status, 2);
  const auto odd = write_config("oddk", R"({"curve": {"curvature": {"L": 3, "k": "s"}}, "width": "0.2"})");
  EXPECT_EQ(run("certify --config " + odd.string()).status, 2);
}
