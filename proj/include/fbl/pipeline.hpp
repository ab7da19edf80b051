#pragma once

#include <algorithm>
#include <filesystem>
#include <future>
#include <map>
#include <string>
#include <vector>

#include "fbl/analysis.hpp"
#include "fbl/config.hpp"
#include "fbl/freeboundary.hpp"
#include "fbl/io.hpp"
#include "fbl/solver.hpp"

// Subcommand bodies shared by the CLI and the tests. Every command computes
// first and writes afterwards, so a failure leaves no partial artifacts.
namespace fbl::pipeline {

using io::json;

struct RunOptions {
  std::filesystem::path out = "out";
  int threads = 1;
};

struct Solved {
  Problem problem;
  Solution solution;
  bool loaded = false;  // read from a stored field instead of solved
};

inline double mask_eps(const ProblemSpec& spec, const Problem& p) {
  return spec.mask_eps > 0.0 ? spec.mask_eps : default_mask_eps(p);
}

inline Solution from_field(ScalarField u, const Problem& p, double eps) {
  require(u.grid() == p.grid, ErrorKind::validation, "stored solution grid does not match the problem grid");
  for (std::size_t k = 0; k < u.grid().size(); ++k)
    if (u[k] < -1e-12 || u[k] > p.psi[k] + 1e-12)
      fail(ErrorKind::validation, "stored solution leaves [0, psi] at node " + to_string(u.grid().node(k)));
  Solution s{std::move(u), PartitionMask{}, SolveReport{}};
  s.mask = classify(s.u, p, eps);
  s.report.residuals = residuals(s.u, s.mask, p);
  s.report.d2_sup = d2_sup(s.u);
  s.report.measure_fraction_gamma = measure_fraction_gamma(s.mask);
  return s;
}

/// Solution at spacing h: the stored field when configured for problem.h, a fresh solve otherwise.
inline Solved obtain(const ExperimentConfig& cfg, double h, int threads) {
  Problem p = cfg.problem.build(h);
  const double eps = mask_eps(cfg.problem, p);
  if (!cfg.solution.empty() && h == cfg.problem.h) {
    Solution s = from_field(io::read_field_csv(cfg.solution), p, eps);
    return {std::move(p), std::move(s), true};
  }
  Solution s = solve(p, cfg.problem.solver(p.grid, threads));
  if (cfg.problem.mask_eps > 0.0) {
    s.mask = classify(s.u, p, eps);
    s.report.residuals = residuals(s.u, s.mask, p);
    s.report.measure_fraction_gamma = measure_fraction_gamma(s.mask);
  }
  return {std::move(p), std::move(s), false};
}

/// Gamma point used as the analysis centre together with the unit normal there.
struct Anchor {
  Point x{};
  Point normal{1.0, 0.0};
  std::vector<FreeBoundaryCurve> gamma;
};

inline Anchor anchor(const ExperimentConfig& cfg, const Solved& s) {
  Anchor a;
  a.gamma = extract(s.solution.u, s.solution.mask, BoundaryKind::gamma, nullptr, cfg.boundary.normal_window);
  if (a.gamma.empty()) fail(ErrorKind::numerical, "no free boundary found in the solution");
  const Point target = cfg.analysis.center ? *cfg.analysis.center : cfg.analysis.center_hint;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : a.gamma)
    for (std::size_t i = 0; i < c.points.size(); ++i)
      if (const double d = norm(c.points[i] - target); d < best) {
        best = d;
        a.x = c.points[i];
        a.normal = c.normals[i];
      }
  if (cfg.analysis.center) a.x = *cfg.analysis.center;
  return a;
}

inline json problem_json(const ExperimentConfig& cfg, const Problem& p) {
  return json{{"lower", io::to_json(cfg.problem.lower)},
              {"upper", io::to_json(cfg.problem.upper)},
              {"h", p.grid.h()},
              {"f", cfg.problem.f.describe()},
              {"psi", cfg.problem.psi.describe()},
              {"bc", cfg.problem.bc.describe()},
              {"c", p.c},
              {"a", p.a}};
}

inline json solve_json(const ExperimentConfig& cfg, const Solved& s) {
  json j{{"problem", problem_json(cfg, s.problem)}, {"source", s.loaded ? "stored" : "solved"}};
  j["solve"] = io::to_json(s.solution.report);
  j["mask"] = {{"eps", s.solution.mask.eps},
               {"zero", s.solution.mask.count(Label::zero)},
               {"open", s.solution.mask.count(Label::open)},
               {"contact", s.solution.mask.count(Label::contact)},
               {"unresolved", s.solution.mask.count(Label::unresolved)}};
  return j;
}

using Files = std::vector<std::pair<std::string, std::string>>;

inline void write_all(const RunOptions& opt, const Files& files) {
  for (const auto& [name, text] : files) io::write_text(opt.out / name, text);
}

// ---------------------------------------------------------------------------
// solve

inline json run_solve(const ExperimentConfig& cfg, const Solved& s, Files& files) {
  files.emplace_back("u.csv", io::field_csv(s.solution.u));
  files.emplace_back("mask.csv", io::mask_csv(s.solution.mask));
  json j = solve_json(cfg, s);
  files.emplace_back("report.json", io::dump(j));
  return j;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeResult {
  FunctionalSeries weiss, acf, thickness_u, thickness_psi;
  DerivativeCheck derivative;
  NondegeneracyReport nondegeneracy;
  MonotoneRadius directional;
  double directional_tol = 0.0;
  double directional_floor = 0.0;
  Anchor anchor;
};

inline PartitionMask psi_zero_mask(const Solved& s) {
  return classify(s.problem.psi, nullptr, s.solution.mask.eps);
}

inline AnalyzeResult analyze(const ExperimentConfig& cfg, const Solved& s, std::uint64_t seed) {
  const AnalysisSpec& an = cfg.analysis;
  const Solution& sol = s.solution;
  const double h = s.problem.grid.h();
  AnalyzeResult r;
  r.anchor = anchor(cfg, s);
  const Point x0 = r.anchor.x;
  r.weiss = weiss_series(sol.u, sol.mask, s.problem.a, x0, an.weiss_radii);
  r.derivative = weiss_derivative_check(sol.u, region_source(sol.mask, s.problem.a, &s.problem.f), x0,
                                        an.derivative_r, an.derivative_dr);
  r.acf = acf_series(sol.u, an.acf_direction, an.acf_radii, x0);
  r.thickness_u = thickness_series(sol.mask, x0, an.thickness_radii);
  r.thickness_psi = thickness_series(psi_zero_mask(s), x0, an.thickness_radii);
  const double rmax = *std::max_element(an.nd_radii.begin(), an.nd_radii.end());
  const auto centers = admissible_centers(sol.mask, static_cast<std::size_t>(an.nd_centers), rmax, seed);
  if (centers.empty()) fail(ErrorKind::numerical, "no admissible non-degeneracy centres in the solution");
  r.nondegeneracy = nondegeneracy_check(sol.u, sol.mask, s.problem.c, centers, an.nd_radii, sol.report.d2_sup);
  r.directional_tol = cfg.tolerances.directional_h * sol.report.d2_sup * h;
  r.directional_floor = an.directional_floor_h * h;
  r.directional = find_monotone_radius(sol.u, r.anchor.normal, an.delta, x0, an.directional_r_start,
                                       r.directional_floor, r.directional_tol);
  return r;
}

inline json directional_json(const AnalyzeResult& r, const AnalysisSpec& an) {
  json j{{"center", io::to_json(r.anchor.x)},
         {"axis", io::to_json(r.anchor.normal)},
         {"delta", an.delta},
         {"tolerance", r.directional_tol},
         {"r_floor", r.directional_floor},
         {"found", r.directional.found},
         {"r", r.directional.r}};
  j["result"] = io::to_json(r.directional.result);
  return j;
}

inline json run_analyze(const ExperimentConfig& cfg, const Solved& s, std::uint64_t seed, Files& files,
                        AnalyzeResult* keep = nullptr) {
  AnalyzeResult r = analyze(cfg, s, seed);
  files.emplace_back("weiss.csv", io::series_csv(r.weiss));
  files.emplace_back("acf.csv", io::series_csv(r.acf));
  files.emplace_back("thickness.csv", io::series_csv(r.thickness_u));
  files.emplace_back("thickness_psi.csv", io::series_csv(r.thickness_psi));
  json nd = io::to_json(r.nondegeneracy);
  nd["seed"] = seed;
  nd["M"] = s.solution.report.d2_sup;
  files.emplace_back("nondegeneracy.json", io::dump(nd));
  files.emplace_back("directional.json", io::dump(directional_json(r, cfg.analysis)));
  json j{{"center", io::to_json(r.anchor.x)},
         {"weiss", io::to_json(r.weiss)},
         {"weiss_derivative",
          {{"r", cfg.analysis.derivative_r}, {"dr", cfg.analysis.derivative_dr}, {"lhs", r.derivative.lhs},
           {"rhs", r.derivative.rhs}, {"difference", std::abs(r.derivative.lhs - r.derivative.rhs)}}},
         {"acf", io::to_json(r.acf)},
         {"thickness_u", io::to_json(r.thickness_u)},
         {"thickness_psi", io::to_json(r.thickness_psi)}};
  files.emplace_back("analysis.json", io::dump(j));
  if (keep) *keep = std::move(r);
  return j;
}

// ---------------------------------------------------------------------------
// blowup

struct BlowupResult {
  BlowupStudy study;
  bool distances_decreasing = false;
  double thickness_min = 0.0;  // min over thickness radii of min(delta_r(u), delta_r(psi))
};

inline BlowupResult blowup(const ExperimentConfig& cfg, const Solved& s) {
  BlowupResult r;
  const Anchor a = anchor(cfg, s);
  r.thickness_min = std::numeric_limits<double>::infinity();
  const PartitionMask pz = psi_zero_mask(s);
  for (double rad : cfg.analysis.thickness_radii)
    r.thickness_min = std::min({r.thickness_min, thickness(s.solution.mask, a.x, rad), thickness(pz, a.x, rad)});
  r.study = blowup_study(s.solution.u, a.x, cfg.blowup.lambdas, s.problem.a, cfg.blowup.options);
  r.distances_decreasing = true;
  for (std::size_t q = 1; q < r.study.scales.size(); ++q)
    if (!(r.study.scales[q].fit.distance < r.study.scales[q - 1].fit.distance)) r.distances_decreasing = false;
  return r;
}

inline json blowup_json(const ExperimentConfig& cfg, const Solved& s, const BlowupResult& r) {
  json j = io::to_json(r.study);
  j["h"] = s.problem.grid.h();
  j["a"] = s.problem.a;
  j["distances_strictly_decreasing"] = r.distances_decreasing;
  j["thickness_min"] = r.thickness_min;
  j["eps0"] = cfg.blowup.eps0;
  return j;
}

inline json run_blowup(const ExperimentConfig& cfg, const Solved& s, Files& files, BlowupResult* keep = nullptr) {
  BlowupResult r = blowup(cfg, s);
  json j = blowup_json(cfg, s, r);
  files.emplace_back("blowup.json", io::dump(j));
  if (keep) *keep = std::move(r);
  return j;
}

// ---------------------------------------------------------------------------
// boundary

struct LipschitzRadius {
  double delta = 0.0;
  bool found = false;
  GraphFit fit;
};

/// Halves r from r_start until the graph fit over the normal has constant <= delta.
inline LipschitzRadius lipschitz_radius(const std::vector<FreeBoundaryCurve>& gamma, const Anchor& a, double delta,
                                        double r_start, double h) {
  LipschitzRadius out;
  out.delta = delta;
  std::vector<Point> pts;
  for (const auto& c : gamma) pts.insert(pts.end(), c.points.begin(), c.points.end());
  for (double r = r_start; r >= 4.0 * h; r *= 0.5) {
    try {
      const GraphFit f = lipschitz_fit(pts, h, a.x, a.normal, r);
      out.fit = f;
      if (f.lipschitz_constant <= delta) {
        out.found = true;
        return out;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::not_a_graph) return out;  // too few points from here on
    }
  }
  return out;
}

struct BoundaryResult {
  std::vector<FreeBoundaryCurve> gamma, gamma_psi;
  C1Diagnostic c1;
  std::vector<LipschitzRadius> lipschitz;
  std::vector<ProximityEvent> gamma_d;
  Anchor anchor;
};

inline BoundaryResult boundary(const ExperimentConfig& cfg, const Solved& s) {
  BoundaryResult r;
  r.anchor = anchor(cfg, s);
  r.gamma = r.anchor.gamma;
  r.gamma_psi = extract(s.solution.u, s.solution.mask, BoundaryKind::gamma_psi, &s.problem.psi,
                        cfg.boundary.normal_window);
  r.c1 = c1_diagnostic(r.gamma, r.anchor.x, cfg.boundary.c1_radii);
  for (double d : cfg.boundary.lipschitz_deltas)
    r.lipschitz.push_back(lipschitz_radius(r.gamma, r.anchor, d, cfg.boundary.lipschitz_r_start, s.problem.grid.h()));
  r.gamma_d = gamma_d_events(r.gamma, r.gamma_psi, s.problem.grid.h());
  return r;
}

inline json boundary_json(const BoundaryResult& r) {
  json lip = json::array();
  for (const auto& l : r.lipschitz) {
    json e{{"delta", l.delta}, {"found", l.found}};
    e["fit"] = io::to_json(l.fit);
    lip.push_back(e);
  }
  std::size_t ng = 0, np = 0;
  for (const auto& c : r.gamma) ng += c.points.size();
  for (const auto& c : r.gamma_psi) np += c.points.size();
  json j{{"center", io::to_json(r.anchor.x)}, {"normal", io::to_json(r.anchor.normal)}};
  j["c1"] = io::to_json(r.c1);
  j["lipschitz"] = lip;
  j["curves"] = {{"gamma", r.gamma.size()}, {"gamma_points", ng}, {"gamma_psi", r.gamma_psi.size()},
                 {"gamma_psi_points", np}};
  j["gamma_d_events"] = r.gamma_d.size();
  return j;
}

inline json run_boundary(const ExperimentConfig& cfg, const Solved& s, Files& files, BoundaryResult* keep = nullptr) {
  BoundaryResult r = boundary(cfg, s);
  files.emplace_back("gamma.csv", io::curves_csv(r.gamma, BoundaryKind::gamma));
  files.emplace_back("gamma_psi.csv", io::curves_csv(r.gamma_psi, BoundaryKind::gamma_psi));
  json j = boundary_json(r);
  files.emplace_back("c1.json", io::dump(j));
  if (keep) *keep = std::move(r);
  return j;
}

// ---------------------------------------------------------------------------
// report

inline json check(const std::string& name, bool pass, json detail) {
  return json{{"name", name}, {"pass", pass}, {"detail", std::move(detail)}};
}

/// Solutions at every spacing the report needs, solved concurrently when threads > 1.
inline std::map<double, Solved> solve_all(const ExperimentConfig& cfg, const std::vector<double>& spacings, int threads) {
  std::map<double, Solved> out;
  if (threads <= 1) {
    for (double h : spacings) out.emplace(h, obtain(cfg, h, 1));
    return out;
  }
  std::vector<std::future<Solved>> jobs;
  for (double h : spacings) jobs.push_back(std::async(std::launch::async, [&cfg, h] { return obtain(cfg, h, 1); }));
  for (std::size_t q = 0; q < spacings.size(); ++q) out.emplace(spacings[q], jobs[q].get());
  return out;
}

inline json run_report(const ExperimentConfig& cfg, std::uint64_t seed, int threads, Files& files) {
  std::vector<double> spacings = cfg.refinement.spacings;
  const double blow_h = cfg.blowup.h > 0.0 ? cfg.blowup.h : cfg.problem.h;
  for (double h : {cfg.problem.h, blow_h})
    if (std::find(spacings.begin(), spacings.end(), h) == spacings.end()) spacings.push_back(h);
  const std::map<double, Solved> solved = solve_all(cfg, spacings, threads);
  const Solved& main = solved.at(cfg.problem.h);
  const double h = cfg.problem.h;

  json report = solve_json(cfg, main);
  report["seed"] = seed;
  Files sink;
  run_solve(cfg, main, sink);
  AnalyzeResult an;
  json analysis = run_analyze(cfg, main, seed, sink, &an);
  BlowupResult bl;
  json blow = run_blowup(cfg, solved.at(blow_h), sink, &bl);
  BoundaryResult bd;
  json bnd = run_boundary(cfg, main, sink, &bd);

  json checks = json::array();
  // Refinement: boundedness of D^2 u and the Gamma cell fraction.
  {
    json rows = json::array();
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double sp : cfg.refinement.spacings) {
      const double d2 = solved.at(sp).solution.report.d2_sup;
      lo = std::min(lo, d2);
      hi = std::max(hi, d2);
      rows.push_back({{"h", sp}, {"d2_sup", d2}});
    }
    const double spread = hi > 0.0 ? (hi - lo) / hi : 0.0;
    checks.push_back(check("d2_sup_bounded", spread <= cfg.refinement.d2_variation,
                           {{"runs", rows}, {"spread", spread}, {"limit", cfg.refinement.d2_variation}}));
    const double coarse = cfg.refinement.spacings.front();
    const double K = solved.at(coarse).solution.report.measure_fraction_gamma / coarse;
    bool ok = true;
    json fr = json::array();
    for (double sp : cfg.refinement.spacings) {
      const double f = solved.at(sp).solution.report.measure_fraction_gamma;
      ok = ok && f <= K * sp * (1.0 + 1e-12);
      fr.push_back({{"h", sp}, {"fraction", f}, {"limit", K * sp}});
    }
    checks.push_back(check("gamma_measure_fraction", ok, {{"K", K}, {"runs", fr}}));
  }
  {
    const double lim = cfg.tolerances.weiss_violation_h * h;
    checks.push_back(check("weiss_monotone", an.weiss.monotone_violation <= lim,
                           {{"violation", an.weiss.monotone_violation}, {"limit", lim}}));
    const double diff = std::abs(an.derivative.lhs - an.derivative.rhs);
    checks.push_back(check("weiss_derivative_identity", diff <= cfg.tolerances.derivative,
                           {{"lhs", an.derivative.lhs}, {"rhs", an.derivative.rhs}, {"difference", diff},
                            {"limit", cfg.tolerances.derivative}}));
    const double alim = cfg.tolerances.acf_violation_h * h;
    checks.push_back(check("acf_monotone", an.acf.monotone_violation <= alim,
                           {{"violation", an.acf.monotone_violation}, {"limit", alim}}));
    checks.push_back(check("nondegeneracy", an.nondegeneracy.pass,
                           {{"min_margin", an.nondegeneracy.min_margin}, {"limit", -an.nondegeneracy.eps_nd},
                            {"checks", an.nondegeneracy.entries.size()}}));
    checks.push_back(check("directional_monotonicity",
                           an.directional.found && an.directional.r >= an.directional_floor * (1.0 - 1e-12),
                           {{"r", an.directional.r}, {"min_derivative", an.directional.result.min_derivative},
                            {"limit", -an.directional_tol}}));
  }
  {
    const auto& last = bl.study.scales.back().fit;
    const bool thick = bl.thickness_min >= cfg.blowup.eps0;
    const bool low = bl.study.verdict == BlowupVerdict::half_space_low &&
                     std::abs(last.k - 1.0) <= cfg.blowup.options.k_tol;
    checks.push_back(check("blowup_classification", thick && low && bl.distances_decreasing,
                           {{"verdict", to_string(bl.study.verdict)}, {"k", last.k},
                            {"distances_strictly_decreasing", bl.distances_decreasing},
                            {"thickness_min", bl.thickness_min}, {"eps0", cfg.blowup.eps0}}));
  }
  {
    json osc = json::array();
    for (const auto& e : bd.c1.entries) osc.push_back(e.oscillation);
    checks.push_back(check("c1_diagnostic", bd.c1.decreasing, {{"radii", cfg.boundary.c1_radii}, {"oscillation", osc}}));
    bool all = true;
    json rows = json::array();
    for (const auto& l : bd.lipschitz) {
      all = all && l.found;
      rows.push_back({{"delta", l.delta}, {"found", l.found}, {"r", l.fit.r}, {"lipschitz_constant", l.fit.lipschitz_constant}});
    }
    checks.push_back(check("lipschitz_graph", all, {{"radii", rows}}));
  }
  bool all_pass = true;
  for (const auto& c : checks) all_pass = all_pass && c["pass"].get<bool>();
  report["analysis"] = analysis;
  report["blowup"] = blow;
  report["boundary"] = bnd;
  report["checks"] = checks;
  report["all_pass"] = all_pass;

  files = std::move(sink);
  for (auto& f : files)
    if (f.first == "report.json") f.second = io::dump(report);
  return report;
}

}  // namespace fbl::pipeline
