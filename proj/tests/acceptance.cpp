// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance <fbl_cli> <config dir>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "fbl/pipeline.hpp"

using namespace fbl;
using namespace fbl::pipeline;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

int failures = 0;

void verdict(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s %2d %-28s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

// Runs one criterion; an exception counts as a failure with its message.
void criterion(int id, const std::string& name, const std::function<bool(std::ostringstream&)>& body) {
  std::ostringstream os;
  bool pass = false;
  try {
    pass = body(os);
  } catch (const std::exception& e) {
    os << "exception: " << e.what();
  }
  verdict(id, name, pass, os.str());
}

Grid square(double h) { return Grid::box({-1, -1}, {1, 1}, h); }

PartitionMask mask_of(const ScalarField& u) {
  const double h = u.grid().h();
  return classify(u, nullptr, 0.25 * h * h);
}

std::vector<double> transitions(const PartitionMask& m, Label which) {
  std::vector<double> out;
  for (int i = 1; i + 2 < m.grid.nx(); ++i)
    if ((m.at(i) == which) != (m.at(i + 1) == which)) out.push_back(m.grid.node(i)[0] + 0.5 * m.grid.h());
  return out;
}

bool located(const std::vector<double>& got, const std::vector<double>& want, double tol) {
  if (got.size() != want.size()) return false;
  for (std::size_t q = 0; q < got.size(); ++q)
    if (std::abs(got[q] - want[q]) > tol) return false;
  return true;
}

std::string slurp(const fs::path& p) { return io::read_text(p); }

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: %s <fbl_cli> <config dir>\n", argv[0]);
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path configs = argv[2];

  // 1. 1D solver against the piecewise quadratic oracle.
  criterion(1, "solver_oracle_1d", [](std::ostringstream& os) {
    const double l = -1.0, r = 1.140625;
    const Obstacle1D psi = Obstacle1D::model(2.0);
    const Exact1D ex = solve_1d_exact(1.0, psi, l, r, 0.0, 1.0);
    SolverConfig sc;
    sc.omega = 1.9;
    std::vector<double> err;
    bool where = true;
    for (double h : {1.0 / 64, 1.0 / 128}) {
      const Grid g = Grid::line(l, r, h);
      const Problem p = Problem::from_forms(g, ClosedForm::constant(1.0), psi.as_form(),
                                            ClosedForm::piecewise_1d(ex.u), 1.0, 2.0);
      const Solution s = solve(p, sc);
      double e = 0;
      for (std::size_t k = 0; k < g.size(); ++k) e = std::max(e, std::abs(s.u[k] - ex.u(g.node(k)[0])));
      err.push_back(e);
      where = where && located(transitions(s.mask, Label::zero), ex.gamma, 2 * h) &&
              located(transitions(s.mask, Label::contact), ex.gamma_psi, 2 * h);
    }
    const double ratio = err[0] / err[1];
    os << "err " << err[0] << " -> " << err[1] << ", ratio " << ratio << " (>= 3), free boundary within 2h: "
       << (where ? "yes" : "no");
    return ratio >= 3.0 && where;
  });

  // Shared solved fixture at the three refinements.
  const ExperimentConfig fx = load_experiment(configs / "fixture.cfg");
  std::map<double, Solved> solved;
  try {
    std::vector<double> hs = fx.refinement.spacings;
    if (std::find(hs.begin(), hs.end(), fx.problem.h) == hs.end()) hs.push_back(fx.problem.h);
    solved = solve_all(fx, hs, 1);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fixture solve failed: %s\n", e.what());
  }
  const bool have = solved.count(fx.problem.h) > 0 && solved.count(1.0 / 256) > 0;
  const double h = fx.problem.h;

  criterion(2, "d2_sup_bounded", [&](std::ostringstream& os) {
    double lo = INFINITY, hi = 0;
    for (double sp : {1.0 / 64, 1.0 / 128, 1.0 / 256}) {
      const double d = solved.at(sp).solution.report.d2_sup;
      os << "h=1/" << std::lround(1 / sp) << ": " << d << "  ";
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    const double spread = (hi - lo) / hi;
    os << "spread " << spread << " (<= 0.10)";
    return spread <= 0.10;
  });

  criterion(3, "weiss_halfspace_value", [](std::ostringstream& os) {
    const double hh = 1.0 / 256;
    const ScalarField u = sample(square(hh), ClosedForm::halfspace(1.0, {1, 0}));
    const FunctionalSeries s = weiss_series(u, mask_of(u), 2.0, {0, 0}, {0.1, 0.2, 0.3});
    double dev = 0;
    for (double w : s.values) dev = std::max(dev, std::abs(w - kPi / 16));
    const auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
    os << "max |W - pi/16| " << dev << " (<= 1e-3), spread " << *hi - *lo << " (<= 1e-4)";
    return dev <= 1e-3 && *hi - *lo <= 1e-4;
  });

  AnalyzeResult an;
  bool analyzed = false;
  if (have) {
    try {
      an = analyze(fx, solved.at(h), fx.seed);
      analyzed = true;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "fixture analysis failed: %s\n", e.what());
    }
  }

  criterion(4, "weiss_monotone", [&](std::ostringstream& os) {
    if (!analyzed) return false;
    const bool grid_ok = an.weiss.radii.size() == 20 && an.weiss.radii.front() == 0.05 && an.weiss.radii.back() == 0.4;
    const double diff = std::abs(an.derivative.lhs - an.derivative.rhs);
    os << "violation " << an.weiss.monotone_violation << " (<= " << 10 * h << "), |dW/dr - boundary term| " << diff
       << " at r=" << fx.analysis.derivative_r << " (<= 0.05)";
    return grid_ok && an.weiss.monotone_violation <= 10 * h && diff <= 0.05 && fx.analysis.derivative_r == 0.2;
  });

  criterion(5, "acf", [&](std::ostringstream& os) {
    const Grid g = square(1.0 / 256);
    const ScalarField p = sample(g, [](const Point& x) { return std::max(0.0, x[0]); });
    const ScalarField m = sample(g, [](const Point& x) { return std::max(0.0, -x[0]); });
    std::vector<double> v;
    for (double r : {0.1, 0.2, 0.3, 0.4}) v.push_back(acf(p, m, r));
    double dev = 0;
    for (double x : v) dev = std::max(dev, std::abs(x - kPi * kPi / 4));
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    os << "two-plane |Phi - pi^2/4| " << dev << " (<= 1e-2), spread " << *hi - *lo << " (<= 1e-3)";
    bool ok = dev <= 1e-2 && *hi - *lo <= 1e-3;
    if (!analyzed) return false;
    const Point e = fx.analysis.acf_direction;
    os << "; fixture e=" << to_string(e) << " violation " << an.acf.monotone_violation << " (<= " << 10 * h << ")";
    return ok && std::abs(e[0]) < 1e-12 && an.acf.monotone_violation <= 10 * h;
  });

  criterion(6, "thickness", [](std::ostringstream& os) {
    const double hh = 1.0 / 128;
    const ScalarField hs = sample(square(hh), ClosedForm::halfspace(1.0, {1, 0}));
    const ScalarField z = sample(square(hh), ClosedForm::zero());
    const PartitionMask mh = mask_of(hs), mz = mask_of(z);
    double worst = -INFINITY;  // largest error relative to its allowance
    for (double r : {0.1, 0.2, 0.4}) {
      worst = std::max(worst, std::abs(thickness(mh, {0, 0}, r) - 1.0) / (2 * hh / r));
      worst = std::max(worst, std::abs(thickness(mz, {0, 0}, r) - 2.0) / (2 * hh / r));
    }
    const ScalarField u = sample(square(hh), ClosedForm::radial_obstacle({-2, 0}, 2.0, 1.0));
    const PartitionMask mu = mask_of(u);
    const Grid ref = Grid::box({-1, -1}, {1, 1}, 1.0 / 64);
    for (double r : {0.25, 0.5}) {
      const ScalarField v = rescale(u, {0, 0}, r, ref);
      const double hr = hh / r;
      const PartitionMask mv = classify(v, nullptr, 0.25 * hr * hr);
      worst = std::max(worst, std::abs(thickness(mv, {0, 0}, 1.0) - thickness(mu, {0, 0}, r)) / (2 * hh / r));
    }
    os << "worst error / (2h/r) " << worst << " (<= 1)";
    return worst <= 1.0;
  });

  criterion(7, "nondegeneracy", [&](std::ostringstream& os) {
    if (!analyzed) return false;
    os << an.nondegeneracy.entries.size() << " checks, min margin " << an.nondegeneracy.min_margin << " (>= "
       << -an.nondegeneracy.eps_nd << ")";
    return an.nondegeneracy.entries.size() == 150 && an.nondegeneracy.pass;
  });

  criterion(8, "blowup_classification", [&](std::ostringstream& os) {
    const BlowupResult b = blowup(fx, solved.at(1.0 / 256));
    os << "thickness " << b.thickness_min << " (>= 0.5), distances";
    for (const auto& s : b.study.scales) os << " " << s.fit.distance;
    const double k = b.study.scales.back().fit.k;
    os << (b.distances_decreasing ? " strictly decreasing" : " NOT decreasing") << ", verdict "
       << to_string(b.study.verdict) << ", k " << k;
    return b.study.scales.size() == 4 && b.thickness_min >= 0.5 && b.distances_decreasing &&
           b.study.verdict == BlowupVerdict::half_space_low && std::abs(k - 1.0) <= 0.15;
  });

  criterion(9, "directional_monotonicity", [&](std::ostringstream& os) {
    if (!analyzed) return false;
    os << "r " << an.directional.r << " (>= " << 8 * h << "), min d_e u " << an.directional.result.min_derivative
       << " (>= " << -an.directional_tol << ")";
    return an.directional.found && an.directional.r >= 8 * h &&
           an.directional.result.min_derivative >= -an.directional_tol;
  });

  criterion(10, "c1_diagnostic", [&](std::ostringstream& os) {
    const BoundaryResult b = boundary(fx, solved.at(h));
    os << "fixture oscillation";
    for (const auto& e : b.c1.entries) os << " " << e.oscillation;
    const ExperimentConfig corner = load_experiment(configs / "corner.cfg");
    const BoundaryResult c = boundary(corner, obtain(corner, corner.problem.h, 1));
    os << "; corner control";
    for (const auto& e : c.c1.entries) os << " " << e.oscillation;
    os << " -> " << (c.c1.decreasing ? "PASS (unexpected)" : "FAIL as expected");
    return b.c1.decreasing && !c.c1.decreasing;
  });

  criterion(11, "gamma_measure_fraction", [&](std::ostringstream& os) {
    const double K = solved.at(1.0 / 64).solution.report.measure_fraction_gamma * 64;
    bool ok = true;
    os << "K " << K << ", fraction/h";
    for (double sp : {1.0 / 64, 1.0 / 128, 1.0 / 256}) {
      const double f = solved.at(sp).solution.report.measure_fraction_gamma;
      os << " " << f / sp;
      ok = ok && f <= K * sp * (1 + 1e-12);
    }
    return ok;
  });

  criterion(12, "report_determinism", [&](std::ostringstream& os) {
    const fs::path dir = fs::temp_directory_path() / ("fbl_acceptance_" + std::to_string(::getpid()));
    std::string text[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path out = dir / std::to_string(k);
      const std::string cmd = cli + " report --config " + (configs / "fixture.cfg").string() + " --out " +
                              out.string() + " --seed 42 >/dev/null";
      const int st = std::system(cmd.c_str());
      if (!WIFEXITED(st) || WEXITSTATUS(st) != 0) {
        os << "report run " << k << " failed";
        return false;
      }
      text[k] = slurp(out / "report.json");
    }
    fs::remove_all(dir);
    os << text[0].size() << " bytes, " << (text[0] == text[1] ? "identical" : "DIFFERENT");
    return !text[0].empty() && text[0] == text[1];
  });

  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
