#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fbl/analysis.hpp"
#include "fbl/error.hpp"
#include "fbl/exact.hpp"
#include "fbl/io.hpp"
#include "fbl/solver.hpp"

namespace fbl {

// Config files are line oriented:
//
//   # comment
//   key = value
//   block {
//     key = value
//   }
//
// Numbers accept p/q fractions ("1/128"). Lists are comma separated or
// linspace(a, b, n). Closed forms use their describe() syntax.
class ConfigBlock {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  std::string source;  // file name for messages
  std::string path;    // dotted block path, empty at top level
  int line = 0;
  std::map<std::string, Entry> values;
  std::map<std::string, ConfigBlock> blocks;

  bool has(const std::string& key) const { return values.count(key) > 0; }

  const ConfigBlock* block(const std::string& name) const {
    used_.insert(name + "{}");
    const auto it = blocks.find(name);
    return it == blocks.end() ? nullptr : &it->second;
  }

  std::string text(const std::string& key, const std::string& dflt) const {
    const Entry* e = find(key);
    return e ? e->value : dflt;
  }

  std::string required_text(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) fail(ErrorKind::validation, where(line) + ": missing required key '" + qualified(key) + "'");
    return e->value;
  }

  double number(const std::string& key, double dflt) const {
    const Entry* e = find(key);
    return e ? parse_number(e->value, *e, key) : dflt;
  }

  long integer(const std::string& key, long dflt) const {
    const Entry* e = find(key);
    if (!e) return dflt;
    const double v = parse_number(e->value, *e, key);
    if (v != static_cast<double>(static_cast<long>(v)))
      fail(ErrorKind::validation, where(e->line) + ": '" + qualified(key) + "' must be an integer");
    return static_cast<long>(v);
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> dflt) const {
    const Entry* e = find(key);
    return e ? parse_list(*e, key) : dflt;
  }

  Point point(const std::string& key, Point dflt) const {
    const Entry* e = find(key);
    if (!e) return dflt;
    const auto v = parse_list(*e, key);
    if (v.size() != 2) fail(ErrorKind::validation, where(e->line) + ": '" + qualified(key) + "' needs two numbers");
    return {v[0], v[1]};
  }

  ClosedForm form(const std::string& key) const {
    const std::string t = required_text(key);
    try {
      return parse_closed_form(t);
    } catch (const Error& err) {
      fail(ErrorKind::validation, where(find(key)->line) + ": " + err.what());
    }
  }

  /// Throws on the first key or block that no reader asked for.
  void reject_unknown() const {
    for (const auto& [k, e] : values)
      if (!used_.count(k)) fail(ErrorKind::validation, where(e.line) + ": unknown key '" + qualified(k) + "'");
    for (const auto& [k, b] : blocks) {
      if (!used_.count(k + "{}")) fail(ErrorKind::validation, where(b.line) + ": unknown block '" + qualified(k) + "'");
      b.reject_unknown();
    }
  }

  std::string where(int at) const { return "config '" + source + "' line " + std::to_string(at); }

 private:
  mutable std::set<std::string> used_;

  const Entry* find(const std::string& key) const {
    used_.insert(key);
    const auto it = values.find(key);
    return it == values.end() ? nullptr : &it->second;
  }
  std::string qualified(const std::string& key) const { return path.empty() ? key : path + "." + key; }

  double parse_number(const std::string& s, const Entry& e, const std::string& key) const {
    const auto bad = [&] {
      fail(ErrorKind::validation, where(e.line) + ": '" + qualified(key) + "' is not a number: '" + s + "'");
    };
    const auto one = [&](const std::string& t) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(t, &used);
      } catch (const std::exception&) {
        bad();
      }
      if (t.find_first_not_of(" \t", used) != std::string::npos) bad();
      return v;
    };
    const auto slash = s.find('/');
    if (slash == std::string::npos) return one(s);
    const double den = one(s.substr(slash + 1));
    if (den == 0.0) bad();
    return one(s.substr(0, slash)) / den;
  }

  std::vector<double> parse_list(const Entry& e, const std::string& key) const {
    std::string s = e.value;
    std::vector<double> out;
    if (s.rfind("linspace(", 0) == 0 && s.back() == ')') {
      std::vector<std::string> parts;
      std::stringstream ss(s.substr(9, s.size() - 10));
      for (std::string part; std::getline(ss, part, ',');) parts.push_back(part);
      if (parts.size() != 3)
        fail(ErrorKind::validation, where(e.line) + ": '" + qualified(key) + "': linspace takes (a, b, n)");
      const double a = parse_number(parts[0], e, key), b = parse_number(parts[1], e, key);
      const double nd = parse_number(parts[2], e, key);
      const int n = static_cast<int>(nd);
      if (n < 1 || nd != n)
        fail(ErrorKind::validation, where(e.line) + ": '" + qualified(key) + "': linspace count must be a positive integer");
      for (int k = 0; k < n; ++k) out.push_back(n == 1 ? a : a + (b - a) * k / (n - 1));
      return out;
    }
    if (s.empty()) return out;
    std::stringstream ss(s);
    for (std::string part; std::getline(ss, part, ',');) out.push_back(parse_number(part, e, key));
    return out;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline ConfigBlock parse_config(const std::string& text, const std::string& source) {
  ConfigBlock root;
  root.source = source;
  root.line = 1;
  std::vector<ConfigBlock*> stack{&root};
  std::istringstream in(text);
  std::string raw;
  int n = 0;
  while (std::getline(in, raw)) {
    ++n;
    const std::string line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    ConfigBlock& top = *stack.back();
    if (line == "}") {
      if (stack.size() == 1) fail(ErrorKind::validation, root.where(n) + ": unmatched '}'");
      stack.pop_back();
      continue;
    }
    if (line.back() == '{') {
      const std::string name = detail::trim(line.substr(0, line.size() - 1));
      if (name.empty() || name.find_first_of(" =") != std::string::npos)
        fail(ErrorKind::validation, root.where(n) + ": malformed block header '" + line + "'");
      if (top.blocks.count(name)) fail(ErrorKind::validation, root.where(n) + ": duplicate block '" + name + "'");
      ConfigBlock& b = top.blocks[name];
      b.source = source;
      b.path = top.path.empty() ? name : top.path + "." + name;
      b.line = n;
      stack.push_back(&b);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::validation, root.where(n) + ": expected 'key = value', got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || key.find(' ') != std::string::npos)
      fail(ErrorKind::validation, root.where(n) + ": malformed key '" + key + "'");
    if (top.values.count(key)) fail(ErrorKind::validation, root.where(n) + ": duplicate key '" + key + "'");
    top.values[key] = {value, n};
  }
  if (stack.size() != 1) fail(ErrorKind::validation, root.where(stack.back()->line) + ": block '" + stack.back()->path + "' is not closed");
  return root;
}

// ---------------------------------------------------------------------------
// Experiment configuration. Defaults reproduce the shipped fixture settings.

struct ProblemSpec {
  Point lower{-1.0, -1.0};
  Point upper{1.0, 1.0};
  double h = 1.0 / 128;
  ClosedForm f = ClosedForm::constant(1.0);
  ClosedForm psi = ClosedForm::zero();
  ClosedForm bc = ClosedForm::zero();
  double c = 1.0;
  double a = 2.0;
  double mask_eps = 0.0;  // 0: 0.25 h^2 min(1, c)
  double omega = 0.0;     // 0: near-optimal for the grid
  double tol = 1e-10;
  long max_iters = 1'000'000;
  SweepOrder order = SweepOrder::lexicographic;

  Problem build(double spacing) const {
    return Problem::from_forms(Grid::box(lower, upper, spacing), f, psi, bc, c, a);
  }
  SolverConfig solver(const Grid& g, int threads) const {
    SolverConfig s;
    s.omega = omega > 0.0 ? omega : near_optimal_omega(g);
    s.tol = tol;
    s.max_iters = max_iters;
    s.order = order;
    s.threads = threads;
    return s;
  }
};

struct AnalysisSpec {
  std::optional<Point> center;  // unset: the Gamma point nearest center_hint
  Point center_hint{0.0, 0.0};
  std::vector<double> weiss_radii = [] {
    std::vector<double> r;
    for (int k = 0; k < 20; ++k) r.push_back(0.05 + k * (0.35 / 19));
    return r;
  }();
  std::vector<double> acf_radii{0.05, 0.1, 0.15, 0.2, 0.3, 0.4};
  Point acf_direction{0.0, 1.0};
  std::vector<double> thickness_radii{0.05, 0.1, 0.2};
  double derivative_r = 0.2;
  double derivative_dr = 0.01;
  long nd_centers = 50;
  std::vector<double> nd_radii{0.05, 0.1, 0.2};
  double delta = 0.5;
  double directional_r_start = 0.4;
  double directional_floor_h = 8.0;  // smallest accepted radius, in units of h
};

struct BlowupSpec {
  std::vector<double> lambdas{0.5, 0.25, 0.125, 0.0625};
  double h = 0.0;  // spacing of the solve used for blowups; 0: problem.h
  BlowupOptions options;
  double eps0 = 0.5;  // thickness condition at the blowup centre
};

struct BoundarySpec {
  std::vector<double> c1_radii{0.3, 0.2, 0.1, 0.05};
  int normal_window = kDefaultNormalWindow;
  std::vector<double> lipschitz_deltas{1.0, 0.5, 0.25};
  double lipschitz_r_start = 0.4;
};

struct RefinementSpec {
  std::vector<double> spacings{1.0 / 64, 1.0 / 128, 1.0 / 256};
  double d2_variation = 0.10;  // relative spread of d2_sup across spacings
};

struct Tolerances {
  double weiss_violation_h = 10.0;  // monotone violation <= this * h
  double acf_violation_h = 10.0;
  double derivative = 0.05;         // |lhs - rhs| of the Weiss derivative identity
  double directional_h = 2.0;       // d_e u >= -this * M * h
};

struct ExperimentConfig {
  ProblemSpec problem;
  AnalysisSpec analysis;
  BlowupSpec blowup;
  BoundarySpec boundary;
  RefinementSpec refinement;
  Tolerances tolerances;
  std::filesystem::path output = "out";
  std::uint64_t seed = 42;
  std::filesystem::path solution;  // optional stored u.csv to analyze instead of solving
  std::filesystem::path source;
};

namespace detail {

inline void check_radii_list(const std::vector<double>& r, const std::string& what) {
  require(!r.empty(), ErrorKind::validation, what + ": radii list is empty");
  for (double x : r) require(x > 0.0 && std::isfinite(x), ErrorKind::validation, what + ": radii must be positive");
}

inline void check_decreasing(const std::vector<double>& r, const std::string& what) {
  for (std::size_t q = 1; q < r.size(); ++q)
    require(r[q] < r[q - 1], ErrorKind::validation, what + " must be strictly decreasing");
}

}  // namespace detail

inline ExperimentConfig experiment_from(const ConfigBlock& root, const std::filesystem::path& source) {
  ExperimentConfig cfg;
  cfg.source = source;
  cfg.output = root.text("output", cfg.output.string());
  const long seed = root.integer("seed", static_cast<long>(cfg.seed));
  require(seed >= 0, ErrorKind::validation, "seed must be non-negative");
  cfg.seed = static_cast<std::uint64_t>(seed);
  if (root.has("solution")) {
    const std::filesystem::path p = root.text("solution", "");
    cfg.solution = p.is_absolute() ? p : source.parent_path() / p;
  }

  const ConfigBlock* pb = root.block("problem");
  if (!pb) fail(ErrorKind::validation, root.where(1) + ": missing block 'problem'");
  ProblemSpec& p = cfg.problem;
  p.lower = pb->point("lower", p.lower);
  p.upper = pb->point("upper", p.upper);
  p.h = pb->number("h", p.h);
  p.f = pb->has("f") ? pb->form("f") : p.f;
  p.psi = pb->form("psi");
  p.bc = pb->form("bc");
  p.c = pb->number("c", p.c);
  p.a = pb->number("a", p.a);
  p.mask_eps = pb->number("mask_eps", p.mask_eps);
  require(p.h > 0.0, ErrorKind::validation, "problem.h must be positive");
  if (const ConfigBlock* sb = pb->block("solver")) {
    p.omega = sb->number("omega", p.omega);
    p.tol = sb->number("tol", p.tol);
    p.max_iters = sb->integer("max_iters", p.max_iters);
    const std::string order = sb->text("order", "lexicographic");
    if (order == "lexicographic") p.order = SweepOrder::lexicographic;
    else if (order == "red_black") p.order = SweepOrder::red_black;
    else fail(ErrorKind::validation, sb->where(sb->line) + ": solver.order must be lexicographic or red_black");
  }

  AnalysisSpec& an = cfg.analysis;
  if (const ConfigBlock* b = root.block("analysis")) {
    if (b->has("center")) an.center = b->point("center", {0, 0});
    an.center_hint = b->point("center_hint", an.center_hint);
    an.weiss_radii = b->numbers("weiss_radii", an.weiss_radii);
    an.acf_radii = b->numbers("acf_radii", an.acf_radii);
    an.acf_direction = b->point("acf_direction", an.acf_direction);
    an.thickness_radii = b->numbers("thickness_radii", an.thickness_radii);
    an.derivative_r = b->number("derivative_r", an.derivative_r);
    an.derivative_dr = b->number("derivative_dr", an.derivative_dr);
    an.nd_centers = b->integer("nondegeneracy_centers", an.nd_centers);
    an.nd_radii = b->numbers("nondegeneracy_radii", an.nd_radii);
    an.delta = b->number("delta", an.delta);
    an.directional_r_start = b->number("directional_r_start", an.directional_r_start);
    an.directional_floor_h = b->number("directional_floor_h", an.directional_floor_h);
  }
  detail::check_radii_list(an.weiss_radii, "analysis.weiss_radii");
  detail::check_radii_list(an.acf_radii, "analysis.acf_radii");
  detail::check_radii_list(an.thickness_radii, "analysis.thickness_radii");
  detail::check_radii_list(an.nd_radii, "analysis.nondegeneracy_radii");
  require(an.nd_centers > 0, ErrorKind::validation, "analysis.nondegeneracy_centers must be positive");
  require(an.delta > 0.0, ErrorKind::validation, "analysis.delta must be positive");

  BlowupSpec& bl = cfg.blowup;
  if (const ConfigBlock* b = root.block("blowup")) {
    bl.lambdas = b->numbers("lambdas", bl.lambdas);
    bl.h = b->number("h", bl.h);
    bl.options.ref_h = b->number("ref_h", bl.options.ref_h);
    bl.options.coarse_directions = static_cast<int>(b->integer("coarse_directions", bl.options.coarse_directions));
    bl.options.k_tol = b->number("k_tol", bl.options.k_tol);
    bl.options.distance_tol = b->number("distance_tol", bl.options.distance_tol);
    bl.eps0 = b->number("eps0", bl.eps0);
  }
  detail::check_radii_list(bl.lambdas, "blowup.lambdas");
  detail::check_decreasing(bl.lambdas, "blowup.lambdas");

  BoundarySpec& bd = cfg.boundary;
  if (const ConfigBlock* b = root.block("boundary")) {
    bd.c1_radii = b->numbers("c1_radii", bd.c1_radii);
    bd.normal_window = static_cast<int>(b->integer("normal_window", bd.normal_window));
    bd.lipschitz_deltas = b->numbers("lipschitz_deltas", bd.lipschitz_deltas);
    bd.lipschitz_r_start = b->number("lipschitz_r_start", bd.lipschitz_r_start);
  }
  detail::check_radii_list(bd.c1_radii, "boundary.c1_radii");
  detail::check_decreasing(bd.c1_radii, "boundary.c1_radii");

  RefinementSpec& rf = cfg.refinement;
  if (const ConfigBlock* b = root.block("refinement")) {
    rf.spacings = b->numbers("spacings", rf.spacings);
    rf.d2_variation = b->number("d2_variation", rf.d2_variation);
  }
  detail::check_radii_list(rf.spacings, "refinement.spacings");
  detail::check_decreasing(rf.spacings, "refinement.spacings");

  Tolerances& t = cfg.tolerances;
  if (const ConfigBlock* b = root.block("tolerances")) {
    t.weiss_violation_h = b->number("weiss_violation_h", t.weiss_violation_h);
    t.acf_violation_h = b->number("acf_violation_h", t.acf_violation_h);
    t.derivative = b->number("derivative", t.derivative);
    t.directional_h = b->number("directional_h", t.directional_h);
  }
  root.reject_unknown();
  return cfg;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  const ConfigBlock root = parse_config(io::read_text(path), path.string());
  return experiment_from(root, path);
}

}  // namespace fbl
