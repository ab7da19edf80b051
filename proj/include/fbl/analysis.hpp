#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fbl/error.hpp"
#include "fbl/geometry.hpp"
#include "fbl/grid.hpp"
#include "fbl/solver.hpp"

namespace fbl {

enum class SeriesKind { weiss, acf, thickness, homogeneity_defect };

inline const char* to_string(SeriesKind k) {
  switch (k) {
    case SeriesKind::weiss: return "WEISS";
    case SeriesKind::acf: return "ACF";
    case SeriesKind::thickness: return "THICKNESS";
    case SeriesKind::homogeneity_defect: return "HOMOGENEITY_DEFECT";
  }
  return "?";
}

/// r -> value along increasing radii. monotone_violation is the largest drop
/// between consecutive values for the kinds that should be nondecreasing.
struct FunctionalSeries {
  std::vector<double> radii;
  std::vector<double> values;
  SeriesKind kind = SeriesKind::weiss;
  double monotone_violation = 0.0;
};

inline FunctionalSeries make_series(SeriesKind kind, std::vector<double> radii, std::vector<double> values) {
  require(!radii.empty(), ErrorKind::validation, "series needs at least one radius");
  require(radii.size() == values.size(), ErrorKind::validation, "series radii and values differ in length");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    require(radii[i] > 0.0 && (i == 0 || radii[i] > radii[i - 1]), ErrorKind::validation,
            "series radii must be positive and strictly increasing");
    require(std::isfinite(values[i]), ErrorKind::numerical, "series value is not finite");
  }
  FunctionalSeries s{std::move(radii), std::move(values), kind, 0.0};
  if (kind == SeriesKind::weiss || kind == SeriesKind::acf)
    for (std::size_t i = 0; i + 1 < s.values.size(); ++i)
      s.monotone_violation = std::max(s.monotone_violation, s.values[i] - s.values[i + 1]);
  return s;
}

inline void check_radii(const std::vector<double>& radii) {
  require(!radii.empty(), ErrorKind::validation, "radii list is empty");
}

// ---------------------------------------------------------------------------
// Rescaling u_lambda(y) = (u(x0 + lambda y) - u(x0)) / lambda^2

inline void check_rescale(const Grid& src, int ring, const Point& x0, double lambda, const Grid& ref) {
  require(lambda >= kMinRadiusCells * src.h() * (1.0 - 1e-12), ErrorKind::validation,
          "rescaling factor below 4h of the source grid");
  const Point lo = x0 + lambda * ref.origin();
  const Point hi = x0 + lambda * ref.upper();
  if (!src.contains(lo, ring) || !src.contains(hi, ring))
    fail(ErrorKind::out_of_domain, "rescaled box around " + to_string(x0) + " leaves the valid region");
}

inline ScalarField rescale(const ScalarField& u, const Point& x0, double lambda, const Grid& ref) {
  check_rescale(u.grid(), u.ring(), x0, lambda, ref);
  const double u0 = interp(u, x0);
  const double inv = 1.0 / (lambda * lambda);
  std::vector<double> v(ref.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = (interp(u, x0 + lambda * ref.node(k)) - u0) * inv;
  return ScalarField(ref, std::move(v));
}

/// Gradient of u_lambda, taken from the source gradient (grad u_lambda = grad u / lambda).
inline VectorField rescale_gradient(const VectorField& grad, const Point& x0, double lambda, const Grid& ref) {
  check_rescale(grad.grid(), grad.ring(), x0, lambda, ref);
  std::vector<Point> v(ref.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = (1.0 / lambda) * interp(grad, x0 + lambda * ref.node(k));
  return VectorField(ref, std::move(v), 0);
}

// ---------------------------------------------------------------------------
// Thickness: minimal width of Lambda(u) n B_r(x0), divided by r

inline std::vector<Point> zero_points(const PartitionMask& mask) {
  std::vector<Point> out;
  for (std::size_t k = 0; k < mask.labels.size(); ++k)
    if (mask.labels[k] == Label::zero) out.push_back(mask.grid.node(k));
  return out;
}

inline double thickness(const std::vector<Point>& set, const Point& x0, double r, double h) {
  require(r >= kMinRadiusCells * h * (1.0 - 1e-12), ErrorKind::validation, "thickness radius below 4h");
  std::vector<Point> in;
  const double r2 = r * r * (1.0 + 1e-12);
  for (const Point& p : set) {
    const Point d = p - x0;
    if (dot(d, d) <= r2) in.push_back(p);
  }
  return minimal_width(in) / r;
}

inline double thickness(const PartitionMask& mask, const Point& x0, double r) {
  return thickness(zero_points(mask), x0, r, mask.grid.h());
}

inline FunctionalSeries thickness_series(const PartitionMask& mask, const Point& x0, const std::vector<double>& radii) {
  check_radii(radii);
  const std::vector<Point> pts = zero_points(mask);
  std::vector<double> v;
  for (double r : radii) v.push_back(thickness(pts, x0, r, mask.grid.h()));
  return make_series(SeriesKind::thickness, radii, std::move(v));
}

// ---------------------------------------------------------------------------
// Weiss energy

/// Values standing in for Lap u in the volume term: f (or 1) on OPEN,
/// a on CONTACT, zero elsewhere.
inline ScalarField region_source(const PartitionMask& mask, double a, const ScalarField* f = nullptr) {
  std::vector<double> s(mask.labels.size(), 0.0);
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (mask.labels[k] == Label::open) s[k] = f ? (*f)[k] : 1.0;
    if (mask.labels[k] == Label::contact) s[k] = a;
  }
  return ScalarField(mask.grid, std::move(s));
}

namespace detail {

struct WeissParts {
  double volume;   // integral of |grad u|^2 + 2 u s over B_r
  double surface;  // integral of u^2 over the sphere
};

/// Volume integrand F = |Du|^2 + 2 u s and its discrete Laplacian. The
/// bilinear disk quadrature of F is a trapezoid rule, so subtracting
/// h^2/12 times the same quadrature of Lap F cancels its leading error.
struct WeissIntegrand {
  ScalarField F;
  ScalarField lapF;

  WeissIntegrand(const ScalarField& u, const ScalarField& source) {
    require(source.grid() == u.grid(), ErrorKind::validation, "source must share the field grid");
    const VectorField grad = gradient(u);
    const Grid& g = u.grid();
    const int ring = std::max(grad.ring(), source.ring());
    std::vector<double> v(g.size(), 0.0);
    for (int j = 0; j < g.ny(); ++j)
      for (int i = 0; i < g.nx(); ++i)
        if (g.inside_ring(i, j, ring)) {
          const std::size_t k = g.index(i, j);
          v[k] = dot(grad[k], grad[k]) + 2.0 * u[k] * source[k];
        }
    F = ScalarField(g, std::move(v), ring);
    lapF = laplacian(F);
  }

  WeissParts parts(const ScalarField& u, const Point& x0, double r) const {
    const double h = u.grid().h();
    const double vol = ball_integral_q1(F, x0, r) - h * h / 12.0 * ball_integral_q1(lapF, x0, r);
    const double sur = sphere_integral(u.grid(), u.ring() + 1, x0, r, [&](const Point& x) {
      const double v = interp_cubic(u, x);
      return v * v;
    });
    return {vol, sur};
  }
};

inline double weiss_value(const WeissParts& w, int n, double r) {
  return w.volume / std::pow(r, n + 2) - 2.0 * w.surface / std::pow(r, n + 3);
}

}  // namespace detail

/// W(r) = r^-(n+2) * int_B (|Du|^2 + 2 u s) - 2 r^-(n+3) * int_dB u^2,
/// with s the supplied Lap u values.
inline double weiss(const ScalarField& u, const ScalarField& source, const Point& x0, double r) {
  return detail::weiss_value(detail::WeissIntegrand(u, source).parts(u, x0, r), u.grid().dim(), r);
}

inline double weiss(const ScalarField& u, const PartitionMask& mask, double a, const Point& x0, double r) {
  return weiss(u, region_source(mask, a), x0, r);
}

inline FunctionalSeries weiss_series(const ScalarField& u, const ScalarField& source, const Point& x0,
                                     const std::vector<double>& radii) {
  check_radii(radii);
  const detail::WeissIntegrand w(u, source);
  std::vector<double> v;
  for (double r : radii) v.push_back(detail::weiss_value(w.parts(u, x0, r), u.grid().dim(), r));
  return make_series(SeriesKind::weiss, radii, std::move(v));
}

inline FunctionalSeries weiss_series(const ScalarField& u, const PartitionMask& mask, double a, const Point& x0,
                                     const std::vector<double>& radii) {
  return weiss_series(u, region_source(mask, a), x0, radii);
}

/// (2 / r^(n+4)) * int_dB |(x - x0).Du - 2u|^2
inline double homogeneity_defect(const ScalarField& u, const VectorField& grad, const Point& x0, double r) {
  const int n = u.grid().dim();
  const double s = sphere_integral(u.grid(), grad.ring() + 1, x0, r, [&](const Point& x) {
    const double d = dot(x - x0, interp_cubic(grad, x)) - 2.0 * interp_cubic(u, x);
    return d * d;
  });
  return 2.0 * s / std::pow(r, n + 4);
}

inline FunctionalSeries homogeneity_series(const ScalarField& u, const Point& x0, const std::vector<double>& radii) {
  check_radii(radii);
  const VectorField grad = gradient(u);
  std::vector<double> v;
  for (double r : radii) v.push_back(homogeneity_defect(u, grad, x0, r));
  return make_series(SeriesKind::homogeneity_defect, radii, std::move(v));
}

struct DerivativeCheck {
  double lhs = 0.0;  // central difference of W
  double rhs = 0.0;  // boundary defect integral
};

inline DerivativeCheck weiss_derivative_check(const ScalarField& u, const ScalarField& source, const Point& x0,
                                              double r, double dr) {
  require(dr > 0.0 && dr < r, ErrorKind::validation, "derivative step must lie in (0, r)");
  const detail::WeissIntegrand w(u, source);
  const VectorField grad = gradient(u);
  const int n = u.grid().dim();
  const double wp = detail::weiss_value(w.parts(u, x0, r + dr), n, r + dr);
  const double wm = detail::weiss_value(w.parts(u, x0, r - dr), n, r - dr);
  return {(wp - wm) / (2.0 * dr), homogeneity_defect(u, grad, x0, r)};
}

// ---------------------------------------------------------------------------
// Alt-Caffarelli-Friedman functional (n = 2, unit weight)

inline constexpr double kAcfDisjointTol = 1e-8;

inline double acf(const ScalarField& vplus, const ScalarField& vminus, double r, const Point& center = {0.0, 0.0}) {
  require(vplus.grid() == vminus.grid(), ErrorKind::validation, "ACF pair must share a grid");
  const Grid& g = vplus.grid();
  const int ring = std::max(vplus.ring(), vminus.ring());
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      if (!g.inside_ring(i, j, ring)) continue;
      const double p = vplus.at(i, j), m = vminus.at(i, j);
      if (p < -kAcfDisjointTol || m < -kAcfDisjointTol || std::abs(p * m) > kAcfDisjointTol)
        fail(ErrorKind::validation, "ACF pair is not nonnegative with disjoint supports at node " +
                                        to_string(g.node(i, j)));
    }
  const ScalarField& wide = vplus.ring() >= vminus.ring() ? vplus : vminus;
  const ScalarField plus(g, std::vector<double>(vplus.values().begin(), vplus.values().end()), wide.ring());
  const ScalarField minus(g, std::vector<double>(vminus.values().begin(), vminus.values().end()), wide.ring());
  return dirichlet_q1(plus, center, r) * dirichlet_q1(minus, center, r) / std::pow(r, 4);
}

/// Positive and negative parts of the directional derivative of u along e.
inline std::pair<ScalarField, ScalarField> directional_parts(const ScalarField& u, const Point& e) {
  const VectorField grad = gradient(u);
  const Grid& g = u.grid();
  std::vector<double> p(g.size(), 0.0), m(g.size(), 0.0);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double d = dot(grad[k], e);
    p[k] = std::max(d, 0.0);
    m[k] = std::max(-d, 0.0);
  }
  return {ScalarField(g, std::move(p), grad.ring()), ScalarField(g, std::move(m), grad.ring())};
}

inline FunctionalSeries acf_series(const ScalarField& u, const Point& e, const std::vector<double>& radii,
                                   const Point& center = {0.0, 0.0}) {
  check_radii(radii);
  require(std::abs(norm(e) - 1.0) < 1e-9, ErrorKind::validation, "ACF direction must be a unit vector");
  const auto [p, m] = directional_parts(u, e);
  std::vector<double> v;
  for (double r : radii) v.push_back(acf(p, m, r, center));
  return make_series(SeriesKind::acf, radii, std::move(v));
}

// ---------------------------------------------------------------------------
// Non-degeneracy

inline constexpr int kSphereSupSamples = 1024;

inline double sphere_sup(const ScalarField& u, const Point& x, double r) {
  check_ball(u.grid(), u.ring(), x, r, "sphere_sup");
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < kSphereSupSamples; ++k) {
    const double t = 2.0 * std::numbers::pi * k / kSphereSupSamples;
    best = std::max(best, interp(u, x + r * Point{std::cos(t), std::sin(t)}));
  }
  return best;
}

/// In the closure of {u > 0}: the nearest node or one of its neighbours is
/// OPEN or CONTACT.
inline bool admissible_center(const PartitionMask& mask, const Point& x) {
  const Grid& g = mask.grid;
  if (!g.contains(x)) return false;
  const int ci = static_cast<int>(std::lround((x[0] - g.origin()[0]) / g.h()));
  const int cj = static_cast<int>(std::lround((x[1] - g.origin()[1]) / g.h()));
  for (int j = cj - 1; j <= cj + 1; ++j)
    for (int i = ci - 1; i <= ci + 1; ++i) {
      if (i < 0 || j < 0 || i >= g.nx() || j >= g.ny()) continue;
      const Label l = mask.at(i, j);
      if (l == Label::open || l == Label::contact) return true;
    }
  return false;
}

/// Seeded draw of admissible node centers whose balls of radius rmax stay
/// inside the valid region of a field with the given ring.
inline std::vector<Point> admissible_centers(const PartitionMask& mask, std::size_t count, double rmax,
                                             std::uint64_t seed, int ring = 1) {
  const Grid& g = mask.grid;
  std::vector<Point> pool;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const Label l = mask.at(i, j);
      if (l != Label::open && l != Label::contact) continue;
      const Point x = g.node(i, j);
      if (g.contains(x - Point{rmax, rmax}, ring) && g.contains(x + Point{rmax, rmax}, ring)) pool.push_back(x);
    }
  std::vector<Point> out;
  if (pool.empty()) return out;
  std::mt19937_64 rng(seed);
  for (std::size_t n = 0; n < count; ++n) out.push_back(pool[rng() % pool.size()]);
  return out;
}

struct NondegeneracyEntry {
  Point center;
  double r;
  double margin;
};

struct NondegeneracyReport {
  std::vector<NondegeneracyEntry> entries;
  double eps_nd = 0.0;
  double min_margin = std::numeric_limits<double>::infinity();
  bool pass = true;
};

/// margin = sup_{dB_r(x)} u - u(x) - (c / 8n) r^2, pass iff every margin >= -M (2h)^2.
inline NondegeneracyReport nondegeneracy_check(const ScalarField& u, const PartitionMask& mask, double c,
                                               const std::vector<Point>& centers,
                                               const std::vector<double>& radii, double M) {
  check_radii(radii);
  require(c > 0.0, ErrorKind::validation, "non-degeneracy constant must be positive");
  require(!centers.empty(), ErrorKind::validation, "no admissible centers for the non-degeneracy check");
  const double h = u.grid().h();
  const int n = u.grid().dim();
  NondegeneracyReport rep;
  rep.eps_nd = M * 4.0 * h * h;
  for (const Point& x : centers) {
    require(admissible_center(mask, x), ErrorKind::validation,
            "center " + to_string(x) + " is not in the closure of the positivity set");
    const double ux = interp(u, x);
    for (double r : radii) {
      const double m = sphere_sup(u, x, r) - ux - c / (8.0 * n) * r * r;
      rep.entries.push_back({x, r, m});
      rep.min_margin = std::min(rep.min_margin, m);
    }
  }
  rep.pass = rep.min_margin >= -rep.eps_nd;
  return rep;
}

// ---------------------------------------------------------------------------
// Directional monotonicity over a cone of directions around `axis`

struct DirectionalResult {
  double min_derivative = std::numeric_limits<double>::infinity();  // min of d_e u
  Point where_derivative{};
  Point dir_derivative{};
  double min_combo = std::numeric_limits<double>::infinity();  // min of C d_e u - u
  Point where_combo{};
  Point dir_combo{};
  int directions = 0;
};

/// Directions e = R(theta) axis with |tan theta| < 1/delta, sampled at
/// cell midpoints of the open angular range.
inline std::vector<Point> cone_directions(const Point& axis, double delta, int count) {
  require(delta > 0.0 && count >= 16, ErrorKind::validation, "cone needs delta > 0 and at least 16 directions");
  const double tmax = std::atan(1.0 / delta);
  const double base = std::atan2(axis[1], axis[0]);
  std::vector<Point> out;
  for (int k = 0; k < count; ++k) {
    const double t = base - tmax + (k + 0.5) * 2.0 * tmax / count;
    out.push_back({std::cos(t), std::sin(t)});
  }
  return out;
}

inline DirectionalResult directional_check(const ScalarField& u, const Point& axis, double delta, double C,
                                           const Point& center, double radius, int count = 33) {
  const VectorField grad = gradient(u);
  const Grid& g = u.grid();
  check_ball(g, grad.ring(), center, radius, "directional_check");
  const std::vector<Point> dirs = cone_directions((1.0 / norm(axis)) * axis, delta, count);
  DirectionalResult res;
  res.directions = count;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const Point x = g.node(i, j);
      if (!grad.valid(i, j) || norm(x - center) > radius) continue;
      for (const Point& e : dirs) {
        const double d = dot(grad.at(i, j), e);
        if (d < res.min_derivative) {
          res.min_derivative = d;
          res.where_derivative = x;
          res.dir_derivative = e;
        }
        const double cmb = C * d - u.at(i, j);
        if (cmb < res.min_combo) {
          res.min_combo = cmb;
          res.where_combo = x;
          res.dir_combo = e;
        }
      }
    }
  return res;
}

struct MonotoneRadius {
  double r = 0.0;
  bool found = false;
  DirectionalResult result;
};

/// Halves r from r_start until min d_e u >= -tol or r drops below r_floor.
inline MonotoneRadius find_monotone_radius(const ScalarField& u, const Point& axis, double delta,
                                           const Point& center, double r_start, double r_floor, double tol) {
  MonotoneRadius out;
  for (double r = r_start; r >= r_floor * (1.0 - 1e-12); r *= 0.5) {
    out.r = r;
    out.result = directional_check(u, axis, delta, 1.0, center, r);
    if (out.result.min_derivative >= -tol) {
      out.found = true;
      return out;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Blowups

enum class BlowupVerdict { half_space_low, half_space_high, unresolved };

inline const char* to_string(BlowupVerdict v) {
  switch (v) {
    case BlowupVerdict::half_space_low: return "HALF_SPACE_LOW";
    case BlowupVerdict::half_space_high: return "HALF_SPACE_HIGH";
    case BlowupVerdict::unresolved: return "UNRESOLVED";
  }
  return "?";
}

struct HalfspaceFit {
  double k = 0.0;
  Point e{1.0, 0.0};
  double distance = std::numeric_limits<double>::infinity();
};

struct BlowupScale {
  double lambda;
  ScalarField field;
  HalfspaceFit fit;
};

struct BlowupStudy {
  Point center{};
  std::vector<BlowupScale> scales;
  BlowupVerdict verdict = BlowupVerdict::unresolved;
};

struct BlowupOptions {
  double ref_h = 1.0 / 32;   // reference grid on [-1, 1]^2
  int coarse_directions = 72;
  double k_tol = 0.15;       // relative band around 1 and around a
  double distance_tol = 0.05;
};

/// sup over the unit ball of |v - k/2 (y.e)+^2| + |Dv - k (y.e)+ e|.
inline double c1_distance(const ScalarField& v, const VectorField& dv, double k, const Point& e) {
  const Grid& g = v.grid();
  double worst = 0.0;
  for (std::size_t q = 0; q < g.size(); ++q) {
    const Point y = g.node(q);
    if (dot(y, y) > 1.0 + 1e-12) continue;
    const double s = std::max(0.0, dot(y, e));
    const double dval = std::abs(v[q] - 0.5 * k * s * s);
    const double dgrad = norm(dv[q] - (k * s) * e);
    worst = std::max(worst, dval + dgrad);
  }
  return worst;
}

namespace detail {

inline constexpr double kGolden = 0.6180339887498949;

template <typename F>
std::pair<double, double> golden_min(F&& f, double lo, double hi, int iters) {
  double x1 = hi - kGolden * (hi - lo), x2 = lo + kGolden * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < iters; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kGolden * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kGolden * (hi - lo);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? std::pair{x1, f1} : std::pair{x2, f2};
}

}  // namespace detail

/// Best HALFSPACE(k, e) in the C^1 distance: for each direction the distance
/// is convex in k, so k comes from a golden-section search; the direction
/// comes from a coarse angular scan refined by golden section.
inline HalfspaceFit fit_halfspace(const ScalarField& v, const VectorField& dv, double k_max,
                                  int coarse_directions = 72) {
  const auto best_k = [&](double theta) {
    const Point e{std::cos(theta), std::sin(theta)};
    return detail::golden_min([&](double k) { return c1_distance(v, dv, k, e); }, 0.0, k_max, 60);
  };
  const double step = 2.0 * std::numbers::pi / coarse_directions;
  double theta0 = 0.0, d0 = std::numeric_limits<double>::infinity();
  for (int q = 0; q < coarse_directions; ++q) {
    const double d = best_k(q * step).second;
    if (d < d0) {
      d0 = d;
      theta0 = q * step;
    }
  }
  const auto [theta, dist] =
      detail::golden_min([&](double t) { return best_k(t).second; }, theta0 - step, theta0 + step, 40);
  HalfspaceFit fit;
  fit.e = {std::cos(theta), std::sin(theta)};
  fit.k = best_k(theta).first;
  fit.distance = dist;
  if (d0 < dist) {  // refinement never loses to the scan
    fit.e = {std::cos(theta0), std::sin(theta0)};
    fit.k = best_k(theta0).first;
    fit.distance = d0;
  }
  return fit;
}

inline BlowupVerdict classify_blowup(const HalfspaceFit& fit, double a, const BlowupOptions& opt = {}) {
  if (std::abs(fit.k - 1.0) <= opt.k_tol && fit.distance < opt.distance_tol) return BlowupVerdict::half_space_low;
  if (std::abs(fit.k - a) <= opt.k_tol * a) return BlowupVerdict::half_space_high;
  return BlowupVerdict::unresolved;
}

inline BlowupStudy blowup_study(const ScalarField& u, const Point& x0, const std::vector<double>& lambdas, double a,
                                const BlowupOptions& opt = {}) {
  require(!lambdas.empty(), ErrorKind::validation, "blowup study needs at least one scale");
  for (std::size_t q = 1; q < lambdas.size(); ++q)
    require(lambdas[q] < lambdas[q - 1], ErrorKind::validation, "blowup scales must decrease");
  const Grid ref = Grid::box({-1.0, -1.0}, {1.0, 1.0}, opt.ref_h);
  const VectorField grad = gradient(u);
  BlowupStudy study;
  study.center = x0;
  const double k_max = 2.0 * std::max(a, 1.0) + 1.0;
  for (double lambda : lambdas) {
    check_rescale(u.grid(), grad.ring(), x0, lambda, ref);
    ScalarField v = rescale(u, x0, lambda, ref);
    const VectorField dv = rescale_gradient(grad, x0, lambda, ref);
    const HalfspaceFit fit = fit_halfspace(v, dv, k_max, opt.coarse_directions);
    study.scales.push_back({lambda, std::move(v), fit});
  }
  study.verdict = classify_blowup(study.scales.back().fit, a, opt);
  return study;
}

}  // namespace fbl
