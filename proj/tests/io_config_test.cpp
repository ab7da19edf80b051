#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "fbl/config.hpp"
#include "fbl/io.hpp"

namespace fbl {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("fbl_io_test_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d / name;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

TEST(Io, FieldRoundTripIsBitExact) {
  const Grid g = Grid::box({-1, -0.5}, {1, 0.5}, 1.0 / 16);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const ScalarField u = sample(g, [&](const Point&) { return U(rng) * 1e-3; });
  const fs::path p = scratch("u.csv");
  io::write_text(p, io::field_csv(u));
  const ScalarField v = io::read_field_csv(p);
  ASSERT_TRUE(v.grid() == g);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(u[k], v[k]);
}

TEST(Io, NumbersReadBack) {
  for (double x : {0.1, 1.0 / 3, 1e-300, -2.5e17, 0.0078125, 0.19634954084936207})
    EXPECT_EQ(std::strtod(io::num(x).c_str(), nullptr), x);
}

TEST(Io, EveryCsvHasSchemaHeader) {
  const Grid g = Grid::box({-1, -1}, {1, 1}, 0.25);
  const ScalarField u = sample(g, ClosedForm::halfspace(1, {1, 0}));
  const PartitionMask m = classify(u, nullptr, 1e-3);
  const FunctionalSeries s = make_series(SeriesKind::weiss, {0.1, 0.2}, {1.0, 0.5});
  FreeBoundaryCurve c;
  c.points = {{0, 0}, {0, 0.1}};
  c.normals = {{1, 0}, {1, 0}};
  EXPECT_EQ(first_line(io::field_csv(u)).rfind("# schema=fbl.field/1 ", 0), 0u);
  EXPECT_EQ(first_line(io::mask_csv(m)).rfind("# schema=fbl.mask/1 ", 0), 0u);
  EXPECT_EQ(first_line(io::series_csv(s)).rfind("# schema=fbl.series/1 ", 0), 0u);
  EXPECT_EQ(first_line(io::curves_csv({c}, BoundaryKind::gamma)).rfind("# schema=fbl.curves/1 ", 0), 0u);
  // violation column: only the drop from 1.0 to 0.5
  EXPECT_NE(io::series_csv(s).find("0.2,0.5,0.5\n"), std::string::npos);
}

TEST(Io, ErrorsNameThePath) {
  const fs::path missing = scratch("does_not_exist.csv");
  try {
    io::read_field_csv(missing);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
    EXPECT_NE(std::string(e.what()).find(missing.string()), std::string::npos);
  }
  const fs::path bad = scratch("bad.csv");
  io::write_text(bad, "x,y,u\n0,0,1\n");
  EXPECT_THROW(io::read_field_csv(bad), Error);
  const Grid g = Grid::box({0, 0}, {1, 1}, 0.5);
  std::string text = io::field_csv(sample(g, ClosedForm::constant(1)));
  text.resize(text.size() - 8);  // drop part of the last row
  io::write_text(bad, text);
  EXPECT_THROW(io::read_field_csv(bad), Error);
}

TEST(Config, ParsesBlocksListsAndFractions) {
  const ConfigBlock root = parse_config(R"(
# comment
seed = 7
outer {
  h = 1/128     # trailing comment
  list = 1, 2.5, -3
  grid = linspace(0, 1, 5)
  inner {
    e = 0, 1
  }
}
)",
                                        "mem");
  EXPECT_EQ(root.integer("seed", 0), 7);
  const ConfigBlock* o = root.block("outer");
  ASSERT_NE(o, nullptr);
  EXPECT_EQ(o->number("h", 0), 1.0 / 128);
  EXPECT_EQ(o->numbers("list", {}), (std::vector<double>{1, 2.5, -3}));
  EXPECT_EQ(o->numbers("grid", {}), (std::vector<double>{0, 0.25, 0.5, 0.75, 1}));
  EXPECT_EQ(o->block("inner")->point("e", {9, 9}), (Point{0, 1}));
  EXPECT_EQ(o->number("absent", 3.5), 3.5);
  EXPECT_NO_THROW(root.reject_unknown());
}

TEST(Config, RejectsMalformedInput) {
  const auto message = [](const std::string& text) {
    try {
      const ConfigBlock b = parse_config(text, "bad.cfg");
      b.reject_unknown();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::validation);
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message("a = 1\na = 2\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("b {\n  x = 1\n").find("not closed"), std::string::npos);
  EXPECT_NE(message("}\n").find("unmatched"), std::string::npos);
  EXPECT_NE(message("just words\n").find("bad.cfg"), std::string::npos);
  EXPECT_NE(message("typo = 1\n").find("unknown key 'typo'"), std::string::npos);

  const ConfigBlock b = parse_config("x = abc\nn = 1.5\n", "c");
  EXPECT_THROW(b.number("x", 0), Error);
  EXPECT_THROW(b.integer("n", 0), Error);
}

const char* kMinimal = R"(
problem {
  psi = disk_psi(center=[-2, 0], R=2, a=2)
  bc = radial_obstacle(center=[-2, 0], R=2, f=1)
}
)";

TEST(Config, ExperimentDefaultsAndValidation) {
  const ExperimentConfig cfg = experiment_from(parse_config(kMinimal, "min"), "min");
  EXPECT_EQ(cfg.problem.h, 1.0 / 128);
  EXPECT_EQ(cfg.analysis.weiss_radii.size(), 20u);
  EXPECT_EQ(cfg.blowup.lambdas.size(), 4u);
  EXPECT_EQ(cfg.seed, 42u);

  const auto rejects = [](const std::string& extra, const std::string& needle) {
    try {
      experiment_from(parse_config(std::string(kMinimal) + extra, "cfg"), "cfg");
      ADD_FAILURE() << "accepted: " << extra;
    } catch (const Error& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  rejects("analysis {\n  weiss_radii =\n}\n", "radii list is empty");
  rejects("analysis {\n  acf_radii = 0.1, -0.2\n}\n", "positive");
  rejects("blowup {\n  lambdas = 0.1, 0.2\n}\n", "strictly decreasing");
  rejects("boundary {\n  c1_radii = 0.1, 0.1\n}\n", "strictly decreasing");
  rejects("extra {\n}\n", "unknown block 'extra'");
  EXPECT_THROW(experiment_from(parse_config("seed = 1\n", "cfg"), "cfg"), Error);  // no problem block
  try {
    experiment_from(parse_config("problem {\n  psi = nonsense(a=1)\n  bc = zero\n}\n", "f.cfg"), "f.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Config, ShippedConfigsLoad) {
  for (const char* name : {"fixture.cfg", "corner.cfg", "halfspace.cfg"}) {
    const ExperimentConfig cfg = load_experiment(fs::path(FBL_CONFIG_DIR) / name);
    EXPECT_GT(cfg.problem.h, 0.0) << name;
    EXPECT_NO_THROW(cfg.problem.build(cfg.problem.h).validate()) << name;
  }
  try {
    load_experiment(fs::path(FBL_CONFIG_DIR) / "missing.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("missing.cfg"), std::string::npos);
  }
}

}  // namespace
}  // namespace fbl
