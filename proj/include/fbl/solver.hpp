#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fbl/error.hpp"
#include "fbl/exact.hpp"
#include "fbl/grid.hpp"

namespace fbl {

/// Discrete double obstacle problem: Lap u = f on {0 < u < psi}, 0 <= u <= psi,
/// Dirichlet data g on the box boundary.
struct Problem {
  Grid grid;
  ScalarField f;
  ScalarField psi;
  ScalarField g;  // only boundary-ring values are used
  double c = 1.0;  // lower bound of f
  double a = 2.0;  // contact Laplacian target (Weiss/ACF scaling)

  static Problem from_forms(const Grid& grid, const ClosedForm& f, const ClosedForm& psi,
                            const ClosedForm& bc, double c, double a) {
    return Problem{grid, sample(grid, f), sample(grid, psi), sample(grid, bc), c, a};
  }

  /// Throws a validation error naming the first violated invariant.
  void validate() const {
    require(f.grid() == grid && psi.grid() == grid && g.grid() == grid, ErrorKind::validation,
            "problem fields must share the problem grid");
    require(c > 0.0, ErrorKind::validation, "lower bound c must be positive");
    require(a > 1.0, ErrorKind::validation, "contact constant a must exceed 1");
    const double tol = 1e-12;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (f[k] < c - tol)
        fail(ErrorKind::validation, "source f below c at node " + to_string(grid.node(k)));
      if (psi[k] < -tol)
        fail(ErrorKind::validation, "obstacle psi negative at node " + to_string(grid.node(k)));
    }
    for (int j = 0; j < grid.ny(); ++j)
      for (int i = 0; i < grid.nx(); ++i) {
        if (grid.inside_ring(i, j, 1)) continue;
        const std::size_t k = grid.index(i, j);
        const double slack = tol * (1.0 + std::abs(psi[k]));
        if (g[k] < -tol || g[k] > psi[k] + slack)
          fail(ErrorKind::validation,
               "boundary data outside [0, psi] at node " + to_string(grid.node(k)));
      }
    // Delta psi >= c where the whole stencil lies in {psi > 0}.
    const ScalarField lap = laplacian(psi);
    const double lap_tol = 1e-8 / (grid.h() * grid.h()) * (1.0 + *std::max_element(psi.values().begin(), psi.values().end()));
    for (int j = 0; j < grid.ny(); ++j)
      for (int i = 0; i < grid.nx(); ++i) {
        if (!lap.valid(i, j)) continue;
        bool positive = psi.at(i, j) > 0 && psi.at(i - 1, j) > 0 && psi.at(i + 1, j) > 0;
        if (grid.dim() == 2) positive = positive && psi.at(i, j - 1) > 0 && psi.at(i, j + 1) > 0;
        if (positive && lap.at(i, j) < c - lap_tol)
          fail(ErrorKind::validation,
               "discrete Laplacian of psi below c at node " + to_string(grid.node(i, j)));
      }
  }
};

enum class SweepOrder { lexicographic, red_black };

struct SolverConfig {
  double omega = 1.5;
  double tol = 1e-10;  // sup-norm of one full sweep's update
  long max_iters = 1'000'000;
  SweepOrder order = SweepOrder::lexicographic;
  int threads = 1;  // used by red-black sweeps only
  int energy_every = 0;  // record the discrete energy every k sweeps (0: never)
  const ScalarField* initial = nullptr;  // optional warm start, clamped into [0, psi]
};

enum class Label : std::uint8_t { zero, open, contact, unresolved };

inline const char* to_string(Label l) {
  switch (l) {
    case Label::zero: return "ZERO";
    case Label::open: return "OPEN";
    case Label::contact: return "CONTACT";
    case Label::unresolved: return "UNRESOLVED";
  }
  return "?";
}

inline int label_code(Label l) { return static_cast<int>(l); }

/// Per-node region labels; the boundary ring is always UNRESOLVED.
struct PartitionMask {
  Grid grid;
  std::vector<Label> labels;
  double eps = 0.0;

  Label at(int i, int j = 0) const { return labels[grid.index(i, j)]; }
  Label operator[](std::size_t k) const { return labels[k]; }
  std::size_t count(Label l) const { return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l)); }
};

struct Residuals {
  double open = 0.0;      // sup over OPEN of |Lap u - f|
  double contact = 0.0;   // sup over CONTACT of |Lap u - Lap psi|
  double zero = 0.0;      // sup over interior-of-ZERO of |Lap u|
  double min_active = std::numeric_limits<double>::infinity();  // min over OPEN u CONTACT of Lap u
};

struct SolveReport {
  long iterations = 0;
  double final_update_norm = 0.0;
  Residuals residuals;
  double d2_sup = 0.0;
  double measure_fraction_gamma = 0.0;
  std::vector<std::pair<long, double>> energy;  // (sweep, energy) when recorded
};

struct Solution {
  ScalarField u;
  PartitionMask mask;
  SolveReport report;
};

/// Default mask tolerance: nodes one cell off Gamma(u) carry u >= c h^2 / 2.
inline double default_mask_eps(const Problem& p) {
  return 0.25 * p.grid.h() * p.grid.h() * std::min(1.0, p.c);
}

/// Discrete energy sum over edges of (1/2)|D u|^2 h^n plus sum of f u h^n.
inline double discrete_energy(std::span<const double> u, const Problem& p) {
  const Grid& g = p.grid;
  const double h = g.h();
  const double cell = g.dim() == 2 ? h * h : h;
  double e = 0.0;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const std::size_t k = g.index(i, j);
      if (i + 1 < g.nx()) {
        const double d = (u[g.index(i + 1, j)] - u[k]) / h;
        e += 0.5 * d * d * cell;
      }
      if (g.dim() == 2 && j + 1 < g.ny()) {
        const double d = (u[g.index(i, j + 1)] - u[k]) / h;
        e += 0.5 * d * d * cell;
      }
      if (g.inside_ring(i, j, 1)) e += p.f[k] * u[k] * cell;
    }
  return e;
}

namespace detail {

struct Sweeper {
  const Grid& g;
  std::vector<double>& u;
  const std::vector<double>& rhs;  // h^2 f
  const ScalarField& psi;
  double omega;

  // Relax one node; returns |update|.
  double relax(int i, int j) const {
    const std::size_t k = g.index(i, j);
    double s = u[k - 1] + u[k + 1];
    double diag = 2.0;
    if (g.dim() == 2) {
      s += u[k - g.nx()] + u[k + g.nx()];
      diag = 4.0;
    }
    const double gs = (s - rhs[k]) / diag;
    const double next = std::clamp(u[k] + omega * (gs - u[k]), 0.0, psi[k]);
    const double d = std::abs(next - u[k]);
    u[k] = next;
    return d;
  }

  double lexicographic() const {
    double m = 0.0;
    for (int j = (g.dim() == 2 ? 1 : 0); j < (g.dim() == 2 ? g.ny() - 1 : 1); ++j)
      for (int i = 1; i < g.nx() - 1; ++i) m = std::max(m, relax(i, j));
    return m;
  }

  double color_rows(int color, int j0, int j1) const {
    double m = 0.0;
    for (int j = j0; j < j1; ++j)
      for (int i = 1 + ((j + color + 1) & 1); i < g.nx() - 1; i += 2) m = std::max(m, relax(i, j));
    return m;
  }

  double red_black(int threads) const {
    if (g.dim() == 1) {
      double m = 0.0;
      for (int color = 0; color < 2; ++color)
        for (int i = 1 + color; i < g.nx() - 1; i += 2) m = std::max(m, relax(i, 0));
      return m;
    }
    double m = 0.0;
    for (int color = 0; color < 2; ++color) {
      const int rows = g.ny() - 2;
      const int t = std::max(1, std::min(threads, rows));
      if (t == 1) {
        m = std::max(m, color_rows(color, 1, g.ny() - 1));
        continue;
      }
      std::vector<double> part(t, 0.0);
      {
        std::vector<std::jthread> pool;
        for (int w = 0; w < t; ++w) {
          const int j0 = 1 + rows * w / t, j1 = 1 + rows * (w + 1) / t;
          pool.emplace_back([&, w, j0, j1] { part[w] = color_rows(color, j0, j1); });
        }
      }
      for (double v : part) m = std::max(m, v);
    }
    return m;
  }
};

}  // namespace detail

/// Labels each interior node from the values of u and psi.
///   ZERO:    |u| <= eps and |grad u| <= sqrt(eps)
///   CONTACT: |u - psi| <= eps (ZERO wins where both hold, i.e. psi <= 2 eps)
///   OPEN:    u > eps and psi - u > eps
/// Without an obstacle (psi == nullptr) nothing is labelled CONTACT.
inline PartitionMask classify(const ScalarField& u, const ScalarField* psi, double eps) {
  const Grid& g = u.grid();
  require(eps > 0.0, ErrorKind::validation, "mask tolerance must be positive");
  const VectorField grad = gradient(u);
  PartitionMask mask{g, std::vector<Label>(g.size(), Label::unresolved), eps};
  const double grad_tol = std::sqrt(eps);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      if (!grad.valid(i, j)) continue;
      const std::size_t k = g.index(i, j);
      const double v = u[k];
      const double top = psi ? (*psi)[k] : std::numeric_limits<double>::infinity();
      const bool zero = std::abs(v) <= eps && norm(grad[k]) <= grad_tol;
      const bool contact = psi && std::abs(v - top) <= eps;
      if (zero) {
        mask.labels[k] = Label::zero;
      } else if (contact) {
        mask.labels[k] = Label::contact;
      } else if (v > eps && top - v > eps) {
        mask.labels[k] = Label::open;
      }
    }
  return mask;
}

inline PartitionMask classify(const ScalarField& u, const Problem& p, double eps) {
  return classify(u, &p.psi, eps);
}

inline Residuals residuals(const ScalarField& u, const PartitionMask& mask, const Problem& p) {
  const Grid& g = u.grid();
  const ScalarField lu = laplacian(u);
  const ScalarField lpsi = laplacian(p.psi);
  Residuals r;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      if (!lu.valid(i, j)) continue;
      const std::size_t k = g.index(i, j);
      switch (mask[k]) {
        case Label::open:
          r.open = std::max(r.open, std::abs(lu[k] - p.f[k]));
          r.min_active = std::min(r.min_active, lu[k]);
          break;
        case Label::contact:
          r.contact = std::max(r.contact, std::abs(lu[k] - lpsi[k]));
          r.min_active = std::min(r.min_active, lu[k]);
          break;
        case Label::zero: {
          bool interior = mask.at(i - 1, j) == Label::zero && mask.at(i + 1, j) == Label::zero;
          if (g.dim() == 2) interior = interior && mask.at(i, j - 1) == Label::zero && mask.at(i, j + 1) == Label::zero;
          if (interior) r.zero = std::max(r.zero, std::abs(lu[k]));
          break;
        }
        case Label::unresolved: break;
      }
    }
  return r;
}

/// Largest second difference (axis, diagonal and mixed stencils) over the
/// concentric half-box.
inline double d2_sup(const ScalarField& u) {
  const Grid& g = u.grid();
  const double h2 = g.h() * g.h();
  const Point lo = g.origin(), hi = g.upper();
  const Point mid = 0.5 * (lo + hi);
  const Point half{0.25 * (hi[0] - lo[0]), 0.25 * (hi[1] - lo[1])};
  double m = 0.0;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      if (!g.inside_ring(i, j, u.ring() + 1)) continue;
      const Point x = g.node(i, j);
      if (std::abs(x[0] - mid[0]) > half[0] + 1e-12) continue;
      if (g.dim() == 2 && std::abs(x[1] - mid[1]) > half[1] + 1e-12) continue;
      const double c = u.at(i, j);
      m = std::max(m, std::abs(u.at(i - 1, j) - 2 * c + u.at(i + 1, j)) / h2);
      if (g.dim() == 1) continue;
      m = std::max(m, std::abs(u.at(i, j - 1) - 2 * c + u.at(i, j + 1)) / h2);
      m = std::max(m, std::abs(u.at(i - 1, j - 1) - 2 * c + u.at(i + 1, j + 1)) / (2 * h2));
      m = std::max(m, std::abs(u.at(i - 1, j + 1) - 2 * c + u.at(i + 1, j - 1)) / (2 * h2));
      m = std::max(m, std::abs(u.at(i + 1, j + 1) - u.at(i + 1, j - 1) - u.at(i - 1, j + 1) +
                               u.at(i - 1, j - 1)) / (4 * h2));
    }
  return m;
}

/// Fraction of grid cells whose corners carry both ZERO and non-ZERO labels
/// (boundary-ring cells excluded).
inline double measure_fraction_gamma(const PartitionMask& mask) {
  const Grid& g = mask.grid;
  long crossed = 0, total = 0;
  if (g.dim() == 1) {
    for (int i = 1; i + 2 < g.nx(); ++i) {
      ++total;
      if ((mask.at(i) == Label::zero) != (mask.at(i + 1) == Label::zero)) ++crossed;
    }
  } else {
    for (int j = 1; j + 2 < g.ny(); ++j)
      for (int i = 1; i + 2 < g.nx(); ++i) {
        ++total;
        const int z = (mask.at(i, j) == Label::zero) + (mask.at(i + 1, j) == Label::zero) +
                      (mask.at(i, j + 1) == Label::zero) + (mask.at(i + 1, j + 1) == Label::zero);
        if (z > 0 && z < 4) ++crossed;
      }
  }
  return total ? static_cast<double>(crossed) / total : 0.0;
}

/// Projected SOR on the bilateral complementarity problem. Each relaxed
/// update is clamped into [0, psi_i]; iteration stops when one full sweep
/// moves no node by more than cfg.tol.
inline Solution solve(const Problem& p, const SolverConfig& cfg = {}) {
  p.validate();
  require(cfg.omega >= 1.0 && cfg.omega < 2.0, ErrorKind::validation, "relaxation must lie in [1, 2)");
  require(cfg.tol > 0.0 && cfg.max_iters > 0, ErrorKind::validation, "tol and max_iters must be positive");
  const Grid& g = p.grid;
  const double h2 = g.h() * g.h();

  std::vector<double> u(g.size(), 0.0), rhs(g.size(), 0.0);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const std::size_t k = g.index(i, j);
      rhs[k] = h2 * p.f[k];
      if (!g.inside_ring(i, j, 1)) {
        u[k] = p.g[k];
      } else if (cfg.initial) {
        require(cfg.initial->grid() == g, ErrorKind::validation, "warm start must share the problem grid");
        u[k] = std::clamp((*cfg.initial)[k], 0.0, p.psi[k]);
      }
    }

  detail::Sweeper sweeper{g, u, rhs, p.psi, cfg.omega};
  SolveReport report;
  double update = std::numeric_limits<double>::infinity();
  long it = 0;
  if (cfg.energy_every > 0) report.energy.emplace_back(0, discrete_energy(u, p));
  while (it < cfg.max_iters) {
    update = cfg.order == SweepOrder::red_black ? sweeper.red_black(cfg.threads) : sweeper.lexicographic();
    ++it;
    if (cfg.energy_every > 0 && it % cfg.energy_every == 0) report.energy.emplace_back(it, discrete_energy(u, p));
    if (update <= cfg.tol) break;
  }
  report.iterations = it;
  report.final_update_norm = update;
  if (update > cfg.tol) {
    std::ostringstream os;
    os << "solver did not converge within " << cfg.max_iters << " sweeps; last update norm " << update;
    fail(ErrorKind::numerical, os.str());
  }

  ScalarField field(g, std::move(u));
  PartitionMask mask = classify(field, p, default_mask_eps(p));
  report.residuals = residuals(field, mask, p);
  report.d2_sup = d2_sup(field);
  report.measure_fraction_gamma = measure_fraction_gamma(mask);
  return Solution{std::move(field), std::move(mask), std::move(report)};
}

/// Solves the family of problems produced by `make` at each spacing and
/// records the half-box second-difference sup.
inline std::vector<std::pair<double, double>> d2_sup_study(const std::function<Problem(double)>& make,
                                                           const std::vector<double>& spacings,
                                                           const SolverConfig& cfg = {}) {
  std::vector<std::pair<double, double>> out;
  for (double h : spacings) out.emplace_back(h, solve(make(h), cfg).report.d2_sup);
  return out;
}

/// Over-relaxation close to the optimum for the Dirichlet Laplacian on the grid.
inline double near_optimal_omega(const Grid& g) {
  const int n = std::max(g.nx(), g.dim() == 2 ? g.ny() : 0) - 1;
  return std::min(1.99, 2.0 / (1.0 + std::sin(std::numbers::pi / n)));
}

}  // namespace fbl
