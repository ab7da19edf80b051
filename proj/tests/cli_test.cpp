// Drives the fbl_cli binary end to end on small grids.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;

struct Outcome {
  int rc = -1;
  std::string err;
};

fs::path workdir() {
  static const fs::path d = [] {
    const fs::path p = fs::temp_directory_path() / ("fbl_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome cli(const std::string& args) {
  const fs::path err = workdir() / "stderr.txt";
  const std::string cmd = std::string(FBL_CLI) + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Outcome r;
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

fs::path write_cfg(const std::string& name, const std::string& text) {
  const fs::path p = workdir() / name;
  std::ofstream(p) << text;
  return p;
}

const std::string kSmall = R"(
problem {
  lower = -1, -1
  upper = 1, 1
  h = 1/32
  f = constant(c=1)
  psi = disk_psi(center=[-2, 0], R=2, a=2)
  bc = radial_obstacle(center=[-2, 0], R=2, f=1)
}
)";

TEST(Cli, SolveWritesFieldMaskAndReport) {
  const fs::path cfg = write_cfg("small.cfg", kSmall);
  const fs::path out = workdir() / "solve_out";
  const Outcome r = cli("solve --config " + cfg.string() + " --out " + out.string());
  ASSERT_EQ(r.rc, 0) << r.err;
  for (const char* f : {"u.csv", "mask.csv", "report.json"}) EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto j = nlohmann::json::parse(slurp(out / "report.json"));
  EXPECT_GT(j["solve"]["iterations"].get<int>(), 0);
  EXPECT_LT(j["solve"]["final_update_norm"].get<double>(), 1e-6);
}

TEST(Cli, StoredSolutionIsReused) {
  const fs::path out = workdir() / "solve_out";
  if (!fs::exists(out / "u.csv")) cli("solve --config " + write_cfg("small.cfg", kSmall).string() + " --out " + out.string());
  const fs::path cfg = write_cfg("reuse.cfg", "solution = solve_out/u.csv\n" + kSmall);
  const Outcome r = cli("boundary --config " + cfg.string() + " --out " + (workdir() / "reuse_out").string());
  EXPECT_EQ(r.rc, 0) << r.err;
  EXPECT_TRUE(fs::exists(workdir() / "reuse_out" / "gamma.csv"));

  const fs::path missing = write_cfg("missing.cfg", "solution = nowhere/u.csv\n" + kSmall);
  const Outcome m = cli("analyze --config " + missing.string() + " --out " + (workdir() / "m_out").string());
  EXPECT_EQ(m.rc, 1);
  EXPECT_NE(m.err.find("nowhere/u.csv"), std::string::npos) << m.err;
}

TEST(Cli, InvalidInputExitsOne) {
  std::string bad = kSmall;
  bad.replace(bad.find("constant(c=1)"), 13, "constant(c=-1)");
  Outcome r = cli("solve --config " + write_cfg("neg_f.cfg", bad).string() + " --out " + (workdir() / "x").string());
  EXPECT_EQ(r.rc, 1);
  EXPECT_NE(r.err.find("error:"), std::string::npos);

  r = cli("analyze --config " + write_cfg("empty.cfg", kSmall + "analysis {\n  weiss_radii =\n}\n").string());
  EXPECT_EQ(r.rc, 1);
  EXPECT_NE(r.err.find("radii list is empty"), std::string::npos) << r.err;

  r = cli("solve --config " + (workdir() / "absent.cfg").string());
  EXPECT_EQ(r.rc, 1);
  EXPECT_NE(r.err.find("absent.cfg"), std::string::npos);

  EXPECT_EQ(cli("solve").rc, 1);  // --config is required
  EXPECT_EQ(cli("frobnicate --config x").rc, 1);
}

TEST(Cli, NonConvergenceExitsTwo) {
  std::string text = kSmall;
  text.insert(text.rfind('}'), "  solver {\n    max_iters = 1\n  }\n");
  const Outcome r = cli("solve --config " + write_cfg("short.cfg", text).string() + " --out " + (workdir() / "y").string());
  EXPECT_EQ(r.rc, 2);
  EXPECT_NE(r.err.find("update norm"), std::string::npos) << r.err;
}

TEST(Cli, HalfspaceWeissSeriesIsConstant) {
  const fs::path out = workdir() / "hs";
  const Outcome r = cli("analyze --config " + (fs::path(FBL_CONFIG_DIR) / "halfspace.cfg").string() + " --out " + out.string());
  ASSERT_EQ(r.rc, 0) << r.err;
  std::istringstream in(slurp(out / "weiss.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("# schema=fbl.series/1 kind=WEISS", 0), 0u) << line;
  std::getline(in, line);
  int rows = 0;
  const double pi16 = 0.19634954084936207;
  while (std::getline(in, line)) {
    const double w = std::stod(line.substr(line.find(',') + 1));
    EXPECT_NEAR(w, pi16, 2e-3) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 20);
}

TEST(Cli, CornerReportFailsC1Check) {
  const fs::path out = workdir() / "corner";
  const Outcome r = cli("report --config " + (fs::path(FBL_CONFIG_DIR) / "corner.cfg").string() + " --out " + out.string());
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(out / "report.json"));
  bool seen = false;
  for (const auto& c : j["checks"])
    if (c["name"] == "c1_diagnostic") {
      seen = true;
      EXPECT_FALSE(c["pass"].get<bool>());
    }
  EXPECT_TRUE(seen);
  EXPECT_FALSE(j["all_pass"].get<bool>());
}

}  // namespace
