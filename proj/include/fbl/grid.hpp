#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fbl/error.hpp"

namespace fbl {

using Point = std::array<double, 2>;

inline double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm(const Point& a) { return std::hypot(a[0], a[1]); }
inline Point operator+(const Point& a, const Point& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Point operator-(const Point& a, const Point& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Point operator*(double s, const Point& a) { return {s * a[0], s * a[1]}; }

inline std::string to_string(const Point& p) {
  std::ostringstream os;
  os.precision(17);
  os << "(" << p[0] << ", " << p[1] << ")";
  return os.str();
}

/// Uniform lattice over an axis-aligned box, node(i, j) = origin + h * (i, j).
/// One-dimensional grids carry ny == 1 and ignore the second coordinate.
class Grid {
 public:
  Grid() = default;

  Grid(int dim, Point origin, double h, std::array<int, 2> dims)
      : dim_(dim), origin_(origin), h_(h), dims_(dims) {
    require(dim == 1 || dim == 2, ErrorKind::validation, "grid dimension must be 1 or 2");
    require(h > 0.0 && std::isfinite(h), ErrorKind::validation, "grid spacing must be positive");
    if (dim == 1) dims_[1] = 1;
    require(dims_[0] >= 3 && (dim == 1 || dims_[1] >= 3), ErrorKind::validation,
            "grid needs at least 3 nodes per axis");
    if (dim == 1) origin_[1] = 0.0;
  }

  /// Box [lo, hi] with spacing h; the extent must be a whole number of cells.
  static Grid box(Point lo, Point hi, double h) {
    std::array<int, 2> dims{};
    for (int a = 0; a < 2; ++a) {
      const double cells = (hi[a] - lo[a]) / h;
      const double rounded = std::round(cells);
      require(std::abs(cells - rounded) < 1e-9 * std::max(1.0, cells), ErrorKind::validation,
              "box extent is not a multiple of h");
      dims[a] = static_cast<int>(rounded) + 1;
    }
    return Grid(2, lo, h, dims);
  }

  static Grid line(double lo, double hi, double h) {
    const double cells = (hi - lo) / h;
    const double rounded = std::round(cells);
    require(std::abs(cells - rounded) < 1e-9 * std::max(1.0, cells), ErrorKind::validation,
            "interval length is not a multiple of h");
    return Grid(1, {lo, 0.0}, h, {static_cast<int>(rounded) + 1, 1});
  }

  int dim() const { return dim_; }
  double h() const { return h_; }
  const Point& origin() const { return origin_; }
  const std::array<int, 2>& dims() const { return dims_; }
  int nx() const { return dims_[0]; }
  int ny() const { return dims_[1]; }
  std::size_t size() const { return static_cast<std::size_t>(dims_[0]) * dims_[1]; }
  Point upper() const {
    return {origin_[0] + h_ * (dims_[0] - 1), dim_ == 2 ? origin_[1] + h_ * (dims_[1] - 1) : 0.0};
  }

  std::size_t index(int i, int j = 0) const {
    return static_cast<std::size_t>(j) * dims_[0] + static_cast<std::size_t>(i);
  }
  Point node(int i, int j = 0) const {
    return {origin_[0] + h_ * i, dim_ == 2 ? origin_[1] + h_ * j : 0.0};
  }
  Point node(std::size_t k) const {
    return node(static_cast<int>(k % dims_[0]), static_cast<int>(k / dims_[0]));
  }

  /// Nodes at least `ring` steps from every box face (in the active axes).
  bool inside_ring(int i, int j, int ring) const {
    if (i < ring || i > dims_[0] - 1 - ring) return false;
    return dim_ == 1 || (j >= ring && j <= dims_[1] - 1 - ring);
  }

  /// Closed box shrunk by `ring` cells; interpolation is valid inside it.
  bool contains(const Point& x, int ring = 0, double slack = 1e-12) const {
    const Point hi = upper();
    const double m = ring * h_;
    const double tol = slack * std::max(1.0, h_);
    for (int a = 0; a < dim_; ++a) {
      if (x[a] < origin_[a] + m - tol || x[a] > hi[a] - m + tol) return false;
    }
    return true;
  }

  bool operator==(const Grid& o) const {
    return dim_ == o.dim_ && origin_ == o.origin_ && h_ == o.h_ && dims_ == o.dims_;
  }

 private:
  int dim_ = 2;
  Point origin_{0.0, 0.0};
  double h_ = 1.0;
  std::array<int, 2> dims_{3, 3};
};

/// Nodal values on a grid. Values are immutable after construction; `ring`
/// counts the outer node layers that carry no valid data (derived fields).
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(Grid grid, std::vector<double> values, int ring = 0)
      : grid_(std::move(grid)), values_(std::move(values)), ring_(ring) {
    require(values_.size() == grid_.size(), ErrorKind::validation,
            "field size does not match its grid");
    for (std::size_t k = 0; k < values_.size(); ++k) {
      const int i = static_cast<int>(k % grid_.nx());
      const int j = static_cast<int>(k / grid_.nx());
      if (grid_.inside_ring(i, j, ring_) && !std::isfinite(values_[k]))
        fail(ErrorKind::validation, "non-finite field value at node " + to_string(grid_.node(k)));
    }
  }

  const Grid& grid() const { return grid_; }
  int ring() const { return ring_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }
  double at(int i, int j = 0) const { return values_[grid_.index(i, j)]; }
  bool valid(int i, int j = 0) const { return grid_.inside_ring(i, j, ring_); }

 private:
  Grid grid_;
  std::vector<double> values_;
  int ring_ = 0;
};

/// Per-node n-vector (second component is zero on 1D grids). Boundary ring invalid.
class VectorField {
 public:
  VectorField() = default;
  VectorField(Grid grid, std::vector<Point> values, int ring = 1)
      : grid_(std::move(grid)), values_(std::move(values)), ring_(ring) {
    require(values_.size() == grid_.size(), ErrorKind::validation,
            "field size does not match its grid");
  }

  const Grid& grid() const { return grid_; }
  int ring() const { return ring_; }
  std::span<const Point> values() const { return values_; }
  const Point& operator[](std::size_t k) const { return values_[k]; }
  const Point& at(int i, int j = 0) const { return values_[grid_.index(i, j)]; }
  bool valid(int i, int j = 0) const { return grid_.inside_ring(i, j, ring_); }

 private:
  Grid grid_;
  std::vector<Point> values_;
  int ring_ = 1;
};

/// Evaluates `expr` at every node. `expr` maps a Point to a real.
template <typename Expr>
ScalarField sample(const Grid& grid, Expr&& expr) {
  std::vector<double> v(grid.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    const Point x = grid.node(k);
    v[k] = expr(x);
    if (!std::isfinite(v[k]))
      fail(ErrorKind::validation, "expression undefined at node " + to_string(x));
  }
  return ScalarField(grid, std::move(v));
}

/// Standard (2n+1)-point Laplacian; the outermost valid ring of `u` becomes invalid.
inline ScalarField laplacian(const ScalarField& u) {
  const Grid& g = u.grid();
  const double inv_h2 = 1.0 / (g.h() * g.h());
  const int ring = u.ring() + 1;
  std::vector<double> out(g.size(), 0.0);
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      if (!g.inside_ring(i, j, ring)) continue;
      const double c = u.at(i, j);
      double s = u.at(i - 1, j) + u.at(i + 1, j) - 2.0 * c;
      if (g.dim() == 2) s += u.at(i, j - 1) + u.at(i, j + 1) - 2.0 * c;
      out[g.index(i, j)] = s * inv_h2;
    }
  }
  return ScalarField(g, std::move(out), ring);
}

/// Central-difference gradient on interior nodes.
inline VectorField gradient(const ScalarField& u) {
  const Grid& g = u.grid();
  const double inv_2h = 0.5 / g.h();
  const int ring = u.ring() + 1;
  std::vector<Point> out(g.size(), Point{0.0, 0.0});
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      if (!g.inside_ring(i, j, ring)) continue;
      Point d{(u.at(i + 1, j) - u.at(i - 1, j)) * inv_2h, 0.0};
      if (g.dim() == 2) d[1] = (u.at(i, j + 1) - u.at(i, j - 1)) * inv_2h;
      out[g.index(i, j)] = d;
    }
  }
  return VectorField(g, std::move(out), ring);
}

namespace detail {

struct Cell {
  int i, j;
  double tx, ty;  // local coordinates in [0, 1]
};

inline Cell locate(const Grid& g, const Point& x, int ring) {
  if (!g.contains(x, ring))
    fail(ErrorKind::out_of_domain, "point " + to_string(x) + " outside the valid grid region");
  const auto axis = [&](int a, int n) {
    const double s = (x[a] - g.origin()[a]) / g.h();
    int c = static_cast<int>(std::floor(s));
    c = std::clamp(c, 0, n - 2);
    return std::pair<int, double>{c, std::clamp(s - c, 0.0, 1.0)};
  };
  const auto [i, tx] = axis(0, g.nx());
  if (g.dim() == 1) return {i, 0, tx, 0.0};
  const auto [j, ty] = axis(1, g.ny());
  return {i, j, tx, ty};
}

template <typename At>
auto multilinear(const Grid& g, const Cell& c, At&& at) {
  if (g.dim() == 1) return (1.0 - c.tx) * at(c.i, 0) + c.tx * at(c.i + 1, 0);
  return (1.0 - c.ty) * ((1.0 - c.tx) * at(c.i, c.j) + c.tx * at(c.i + 1, c.j)) +
         c.ty * ((1.0 - c.tx) * at(c.i, c.j + 1) + c.tx * at(c.i + 1, c.j + 1));
}

}  // namespace detail

/// Multilinear interpolation; exact for multilinear data and at nodes.
inline double interp(const ScalarField& u, const Point& x) {
  const Grid& g = u.grid();
  const auto cell = detail::locate(g, x, u.ring());
  return detail::multilinear(g, cell, [&](int i, int j) { return u.at(i, j); });
}

inline Point interp(const VectorField& v, const Point& x) {
  const Grid& g = v.grid();
  const auto cell = detail::locate(g, x, v.ring());
  Point out{};
  for (int a = 0; a < 2; ++a)
    out[a] = detail::multilinear(g, cell, [&](int i, int j) { return v.at(i, j)[a]; });
  return out;
}

/// Node weights for quadrature over B_r(center): each node owns the cell
/// [x - h/2, x + h/2]^n and is weighted by the fraction of that cell inside
/// the ball, estimated with `subcells`^n point samples on straddling cells.
struct BallWeights {
  std::vector<std::pair<std::size_t, double>> entries;  // (node index, weight * h^n)
};

inline constexpr int kBallSubcells = 4;
inline constexpr double kMinRadiusCells = 4.0;

inline void check_ball(const Grid& g, int ring, const Point& center, double r,
                       const char* what) {
  if (!(r >= kMinRadiusCells * g.h() * (1.0 - 1e-12)))
    fail(ErrorKind::validation, std::string(what) + ": radius below 4h, quadrature unreliable");
  // The ball's bounding box must stay within the valid region.
  for (int a = 0; a < g.dim(); ++a) {
    Point lo = center, hi = center;
    lo[a] -= r;
    hi[a] += r;
    if (!g.contains(lo, ring) || !g.contains(hi, ring))
      fail(ErrorKind::out_of_domain,
           std::string(what) + ": ball around " + to_string(center) + " leaves the valid region");
  }
}

inline BallWeights ball_weights(const Grid& g, int ring, const Point& center, double r,
                                int subcells = kBallSubcells) {
  check_ball(g, ring, center, r, "ball_integral");
  BallWeights w;
  const double h = g.h();
  const double cell_measure = g.dim() == 2 ? h * h : h;
  const auto range = [&](int a, int n) {
    const int lo = std::max(0, static_cast<int>(std::floor((center[a] - r - g.origin()[a]) / h)) - 1);
    const int hi = std::min(n - 1, static_cast<int>(std::ceil((center[a] + r - g.origin()[a]) / h)) + 1);
    return std::pair<int, int>{lo, hi};
  };
  const auto [i0, i1] = range(0, g.nx());
  if (g.dim() == 1) {
    for (int i = i0; i <= i1; ++i) {
      const double x = g.node(i)[0];
      const double lo = std::max(x - 0.5 * h, center[0] - r);
      const double hi = std::min(x + 0.5 * h, center[0] + r);
      if (hi > lo) w.entries.emplace_back(g.index(i), (hi - lo));
    }
    return w;
  }
  const auto [j0, j1] = range(1, g.ny());
  const double half_diag = std::sqrt(0.5) * h;
  for (int j = j0; j <= j1; ++j) {
    for (int i = i0; i <= i1; ++i) {
      const Point x = g.node(i, j);
      const double d = norm(x - center);
      double frac;
      if (d + half_diag <= r) {
        frac = 1.0;
      } else if (d - half_diag >= r) {
        continue;
      } else {
        int inside = 0;
        for (int b = 0; b < subcells; ++b) {
          for (int a = 0; a < subcells; ++a) {
            const Point s{x[0] + h * ((a + 0.5) / subcells - 0.5),
                          x[1] + h * ((b + 0.5) / subcells - 0.5)};
            const Point q = s - center;
            if (dot(q, q) < r * r) ++inside;
          }
        }
        if (inside == 0) continue;
        frac = static_cast<double>(inside) / (subcells * subcells);
      }
      w.entries.emplace_back(g.index(i, j), frac * cell_measure);
    }
  }
  return w;
}

/// Integral over B_r(center) of a per-node integrand `value(k)`.
template <typename NodeValue>
double ball_integral(const Grid& g, int ring, const Point& center, double r, NodeValue&& value,
                     int subcells = kBallSubcells) {
  const BallWeights w = ball_weights(g, ring, center, r, subcells);
  double s = 0.0;
  for (const auto& [k, wt] : w.entries) s += wt * value(k);
  return s;
}

inline double ball_integral(const ScalarField& f, const Point& center, double r,
                            int subcells = kBallSubcells) {
  return ball_integral(f.grid(), f.ring(), center, r, [&](std::size_t k) { return f[k]; },
                       subcells);
}

/// Number of trapezoid samples used on a circle of radius r at spacing h.
inline int sphere_samples(double h, double r) {
  return std::max(64, static_cast<int>(std::ceil(2.0 * std::numbers::pi * r / h)));
}

/// Surface integral over the sphere of radius r about `center`, integrand
/// given as a function of the sample point. In 1D the "sphere" is the two
/// endpoints {center - r, center + r}.
template <typename PointValue>
double sphere_integral(const Grid& g, int ring, const Point& center, double r,
                       PointValue&& value) {
  check_ball(g, ring, center, r, "sphere_integral");
  if (g.dim() == 1) return value(Point{center[0] - r, 0.0}) + value(Point{center[0] + r, 0.0});
  const int n = sphere_samples(g.h(), r);
  const double dtheta = 2.0 * std::numbers::pi / n;
  double s = 0.0;
  for (int k = 0; k < n; ++k) {
    const double t = k * dtheta;
    s += value(Point{center[0] + r * std::cos(t), center[1] + r * std::sin(t)});
  }
  return s * dtheta * r;
}

inline double sphere_integral(const ScalarField& f, const Point& center, double r) {
  return sphere_integral(f.grid(), f.ring(), center, r,
                         [&](const Point& x) { return interp(f, x); });
}

// Catmull-Rom sampling. Reproduces quadratics, third order for smooth data;
// the 4 x 4 stencil needs one more valid layer than multilinear interp.
namespace detail {

inline std::array<double, 4> catmull_rom(double t) {
  const double t2 = t * t, t3 = t2 * t;
  return {0.5 * (-t3 + 2 * t2 - t), 0.5 * (3 * t3 - 5 * t2 + 2), 0.5 * (-3 * t3 + 4 * t2 + t), 0.5 * (t3 - t2)};
}

template <typename At>
double cubic(const Grid& g, const Point& x, int ring, At&& at) {
  require(g.dim() == 2, ErrorKind::validation, "cubic sampling is implemented for n = 2");
  const Cell c = locate(g, x, ring + 1);
  const auto wx = catmull_rom(c.tx), wy = catmull_rom(c.ty);
  double s = 0.0;
  for (int b = 0; b < 4; ++b)
    for (int a = 0; a < 4; ++a) s += wx[a] * wy[b] * at(c.i - 1 + a, c.j - 1 + b);
  return s;
}

}  // namespace detail

inline double interp_cubic(const ScalarField& u, const Point& x) {
  return detail::cubic(u.grid(), x, u.ring(), [&](int i, int j) { return u.at(i, j); });
}

inline Point interp_cubic(const VectorField& v, const Point& x) {
  Point out{};
  for (int a = 0; a < 2; ++a)
    out[a] = detail::cubic(v.grid(), x, v.ring(), [&](int i, int j) { return v.at(i, j)[a]; });
  return out;
}

// Disk integrals of cellwise polynomials, with the disk geometry resolved
// exactly in t and by Gauss-Legendre in s between the points where the
// circle crosses the cell.
namespace detail {

inline constexpr std::array<double, 8> kGaussX{0.0198550717512319, 0.1016667612931866, 0.2372337950418355,
                                               0.4082826787521751, 0.5917173212478249, 0.7627662049581645,
                                               0.8983332387068134, 0.9801449282487681};
inline constexpr std::array<double, 8> kGaussW{0.0506142681451881, 0.1111905172266872, 0.1568533229389436,
                                               0.1813418916891810, 0.1813418916891810, 0.1568533229389436,
                                               0.1111905172266872, 0.0506142681451881};

/// Integral over the unit cell of (i, j) cut by B_r(c) of
/// p0(s) + p1(s) t + p2(s) t^2, in local coordinates (s, t) in [0, 1]^2.
template <typename Coef>
double cell_disk_integral(const Grid& g, int i, int j, const Point& c, double r, Coef&& coef) {
  const double h = g.h();
  const Point lo = g.node(i, j);
  const double sa = std::max(0.0, (c[0] - r - lo[0]) / h), sb = std::min(1.0, (c[0] + r - lo[0]) / h);
  if (sb <= sa) return 0.0;
  std::vector<double> cuts{sa, sb};
  for (double yl : {lo[1], lo[1] + h}) {
    const double dy = yl - c[1];
    if (std::abs(dy) >= r) continue;
    const double w = std::sqrt(r * r - dy * dy);
    for (double x : {c[0] - w, c[0] + w}) {
      const double s = (x - lo[0]) / h;
      if (s > sa && s < sb) cuts.push_back(s);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t q = 0; q + 1 < cuts.size(); ++q) {
    const double s0 = cuts[q], len = cuts[q + 1] - cuts[q];
    if (len <= 0.0) continue;
    for (std::size_t k = 0; k < kGaussX.size(); ++k) {
      const double s = s0 + len * kGaussX[k];
      const double dx = lo[0] + s * h - c[0];
      const double w = std::sqrt(std::max(0.0, r * r - dx * dx));
      const double t0 = std::clamp((c[1] - w - lo[1]) / h, 0.0, 1.0);
      const double t1 = std::clamp((c[1] + w - lo[1]) / h, 0.0, 1.0);
      if (t1 <= t0) continue;
      const auto [p0, p1, p2] = coef(s);
      total += len * kGaussW[k] *
               (p0 * (t1 - t0) + p1 * (t1 * t1 - t0 * t0) / 2 + p2 * (t1 * t1 * t1 - t0 * t0 * t0) / 3);
    }
  }
  return total;
}

/// Sum over cells meeting B_r(c) of cell_disk_integral, with cells inside
/// the disk integrated by 3-point Gauss in s (exact for quadratic p).
template <typename CellCoef>
double disk_sum(const Grid& g, int ring, const Point& c, double r, CellCoef&& cell_coef) {
  check_ball(g, ring + 1, c, r, "disk quadrature");
  const double h = g.h();
  const int i0 = std::max(0, static_cast<int>(std::floor((c[0] - r - g.origin()[0]) / h)));
  const int i1 = std::min(g.nx() - 2, static_cast<int>(std::floor((c[0] + r - g.origin()[0]) / h)));
  const int j0 = std::max(0, static_cast<int>(std::floor((c[1] - r - g.origin()[1]) / h)));
  const int j1 = std::min(g.ny() - 2, static_cast<int>(std::floor((c[1] + r - g.origin()[1]) / h)));
  constexpr double g3x[3] = {0.1127016653792583, 0.5, 0.8872983346207417};
  constexpr double g3w[3] = {5.0 / 18, 8.0 / 18, 5.0 / 18};
  double total = 0.0;
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) {
      const auto coef = cell_coef(i, j);
      const Point lo = g.node(i, j);
      bool inside = true;
      for (Point corner : {lo, lo + Point{h, 0}, lo + Point{0, h}, lo + Point{h, h}})
        inside = inside && dot(corner - c, corner - c) <= r * r;
      if (!inside) {
        total += cell_disk_integral(g, i, j, c, r, coef);
        continue;
      }
      for (int k = 0; k < 3; ++k) {
        const auto [p0, p1, p2] = coef(g3x[k]);
        total += g3w[k] * (p0 + p1 / 2 + p2 / 3);
      }
    }
  return total;
}

}  // namespace detail

/// Integral over B_r(center) of the cellwise bilinear interpolant of f.
inline double ball_integral_q1(const ScalarField& f, const Point& center, double r) {
  const Grid& g = f.grid();
  require(g.dim() == 2, ErrorKind::validation, "bilinear disk quadrature is implemented for n = 2");
  const double area = g.h() * g.h();
  return area * detail::disk_sum(g, f.ring(), center, r, [&](int i, int j) {
    const double f00 = f.at(i, j), f10 = f.at(i + 1, j), f01 = f.at(i, j + 1), f11 = f.at(i + 1, j + 1);
    return [=](double s) {
      return std::array<double, 3>{(1 - s) * f00 + s * f10, (1 - s) * (f01 - f00) + s * (f11 - f10), 0.0};
    };
  });
}

/// Dirichlet energy over B_r(center) of the cellwise bilinear interpolant of v.
inline double dirichlet_q1(const ScalarField& v, const Point& center, double r) {
  const Grid& g = v.grid();
  require(g.dim() == 2, ErrorKind::validation, "bilinear disk quadrature is implemented for n = 2");
  return detail::disk_sum(g, v.ring(), center, r, [&](int i, int j) {
    const double v00 = v.at(i, j), v10 = v.at(i + 1, j), v01 = v.at(i, j + 1), v11 = v.at(i + 1, j + 1);
    const double a0 = v10 - v00, da = (v11 - v01) - a0, b0 = v01 - v00, db = (v11 - v10) - b0;
    return [=](double s) {
      const double gy = b0 + s * db;  // h * d/dy, constant in t
      return std::array<double, 3>{a0 * a0 + gy * gy, 2 * a0 * da, da * da};
    };
  });
}

}  // namespace fbl
