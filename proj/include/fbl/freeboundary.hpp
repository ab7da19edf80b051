#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

#include "fbl/error.hpp"
#include "fbl/grid.hpp"
#include "fbl/solver.hpp"

namespace fbl {

enum class BoundaryKind { gamma, gamma_psi };

inline const char* to_string(BoundaryKind k) { return k == BoundaryKind::gamma ? "GAMMA" : "GAMMA_PSI"; }

struct FreeBoundaryCurve {
  BoundaryKind which = BoundaryKind::gamma;
  std::vector<Point> points;
  std::vector<Point> normals;  // unit, pointing away from the labelled set
  bool closed = false;
  double h = 0.0;  // spacing of the source grid
};

inline constexpr int kDefaultNormalWindow = 3;

// ---------------------------------------------------------------------------
// Normals

/// Unit normals from total-least-squares line fits over +-window neighbours.
/// Open curves shift the window at their ends so every fit uses 2w+1 points.
inline std::vector<Point> normals(const FreeBoundaryCurve& c, int window) {
  const int n = static_cast<int>(c.points.size());
  require(window >= 1, ErrorKind::validation, "normal window must be at least 1");
  require(n >= 3, ErrorKind::validation, "normal fit needs at least 3 curve points");
  const int span = std::min(2 * window + 1, n);
  std::vector<Point> out(n);
  for (int i = 0; i < n; ++i) {
    int lo = i - window;
    if (!c.closed) lo = std::clamp(lo, 0, n - span);
    double mx = 0, my = 0;
    for (int q = 0; q < span; ++q) {
      const Point& p = c.points[((lo + q) % n + n) % n];
      mx += p[0];
      my += p[1];
    }
    mx /= span;
    my /= span;
    double sxx = 0, syy = 0, sxy = 0;
    for (int q = 0; q < span; ++q) {
      const Point& p = c.points[((lo + q) % n + n) % n];
      sxx += (p[0] - mx) * (p[0] - mx);
      syy += (p[1] - my) * (p[1] - my);
      sxy += (p[0] - mx) * (p[1] - my);
    }
    if (sxx + syy <= 1e-30) fail(ErrorKind::numerical, "degenerate normal window at " + to_string(c.points[i]));
    // Principal axis angle of the scatter; the normal is perpendicular.
    const double t = 0.5 * std::atan2(2 * sxy, sxx - syy);
    out[i] = {-std::sin(t), std::cos(t)};
  }
  return out;
}

namespace detail {

/// Flips each normal toward larger `w` (u for GAMMA, psi - u for GAMMA_PSI).
template <typename W>
void orient(std::vector<Point>& nrm, const std::vector<Point>& pts, double h, W&& w) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double plus = w(pts[i] + h * nrm[i]);
    const double minus = w(pts[i] - (h * nrm[i]));
    if (minus > plus) nrm[i] = -1.0 * nrm[i];
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Extraction

/// Marching squares on the indicator of the labelled set: ZERO for GAMMA;
/// for GAMMA_PSI the discrete {u = psi}, i.e. CONTACT plus ZERO nodes where
/// psi itself is within eps (the common zero set belongs to {u = psi}). On each crossing edge from labelled node A to
/// unlabelled node B the point sits where sqrt(w) extrapolates to zero,
/// w = u (resp. psi - u) vanishing quadratically: with B2 the next node past
/// B, the offset from B toward A is h sqrt(w_B) / (sqrt(w_B2) - sqrt(w_B)).
inline std::vector<FreeBoundaryCurve> extract(const ScalarField& u, const PartitionMask& mask, BoundaryKind which,
                                              const ScalarField* psi = nullptr, int window = kDefaultNormalWindow) {
  const Grid& g = u.grid();
  require(g.dim() == 2, ErrorKind::validation, "extraction is implemented for n = 2");
  require(mask.grid == g, ErrorKind::validation, "mask must share the field grid");
  require(which == BoundaryKind::gamma || psi != nullptr, ErrorKind::validation,
          "GAMMA_PSI extraction needs the obstacle");
  const double h = g.h();
  const auto w = [&](int i, int j) {
    const std::size_t k = g.index(i, j);
    const double v = which == BoundaryKind::gamma ? u[k] : (*psi)[k] - u[k];
    return std::sqrt(std::max(0.0, v));
  };
  const auto in = [&](int i, int j) {
    const Label l = mask.at(i, j);
    if (which == BoundaryKind::gamma) return l == Label::zero;
    const std::size_t k = g.index(i, j);
    return l == Label::contact || (l == Label::zero && (*psi)[k] - u[k] <= mask.eps);
  };
  const auto usable = [&](int i, int j) { return g.inside_ring(i, j, 1); };

  std::map<long, Point> edge_point;
  const auto edge_id = [&](int i, int j, int dir) { return 2L * static_cast<long>(g.index(i, j)) + dir; };
  // Point on the edge from (ia, ja) (labelled) to (ib, jb).
  const auto locate_on = [&](int ia, int ja, int ib, int jb) {
    const Point A = g.node(ia, ja), B = g.node(ib, jb);
    const int di = ib - ia, dj = jb - ja;
    const int i2 = ib + di, j2 = jb + dj;
    double d = 0.5 * h;
    const double sb = w(ib, jb);
    if (usable(i2, j2) && !in(i2, j2)) {
      const double s2 = w(i2, j2);
      if (s2 > sb) d = std::clamp(h * sb / (s2 - sb), 0.0, 2.0 * h);
    }
    return B + (d / h) * (A - B);
  };
  const auto point_for = [&](int i, int j, int dir) {
    const long id = edge_id(i, j, dir);
    auto it = edge_point.find(id);
    if (it != edge_point.end()) return id;
    const int i2 = dir == 0 ? i + 1 : i, j2 = dir == 0 ? j : j + 1;
    const Point p = in(i, j) ? locate_on(i, j, i2, j2) : locate_on(i2, j2, i, j);
    edge_point.emplace(id, p);
    return id;
  };

  // Segments between edge ids. Edges of cell (i, j): bottom (i,j,0), top (i,j+1,0),
  // left (i,j,1), right (i+1,j,1).
  std::vector<std::pair<long, long>> segs;
  for (int j = 1; j + 2 < g.ny(); ++j)
    for (int i = 1; i + 2 < g.nx(); ++i) {
      const bool b0 = in(i, j), b1 = in(i + 1, j), b2 = in(i + 1, j + 1), b3 = in(i, j + 1);
      const int code = b0 | (b1 << 1) | (b2 << 2) | (b3 << 3);
      if (code == 0 || code == 15) continue;
      const auto E = [&](int e) {
        switch (e) {
          case 0: return point_for(i, j, 0);      // bottom
          case 1: return point_for(i + 1, j, 1);  // right
          case 2: return point_for(i, j + 1, 0);  // top
          default: return point_for(i, j, 1);     // left
        }
      };
      // Crossed edges: bottom if b0 != b1, right if b1 != b2, top if b2 != b3, left if b3 != b0.
      std::vector<int> cross;
      if (b0 != b1) cross.push_back(0);
      if (b1 != b2) cross.push_back(1);
      if (b2 != b3) cross.push_back(2);
      if (b3 != b0) cross.push_back(3);
      if (cross.size() == 2) {
        segs.emplace_back(E(cross[0]), E(cross[1]));
      } else {
        // Saddle: keep the labelled corners apart.
        if (b0) {
          segs.emplace_back(E(3), E(0));
          segs.emplace_back(E(1), E(2));
        } else {
          segs.emplace_back(E(0), E(1));
          segs.emplace_back(E(2), E(3));
        }
      }
    }

  // Chain segments into polylines.
  std::map<long, std::vector<std::size_t>> at;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    at[segs[s].first].push_back(s);
    at[segs[s].second].push_back(s);
  }
  std::vector<bool> used(segs.size(), false);
  std::vector<FreeBoundaryCurve> curves;
  const auto walk = [&](long start) {
    FreeBoundaryCurve c;
    c.which = which;
    c.h = h;
    std::vector<long> ids{start};
    long cur = start;
    for (;;) {
      std::size_t next = segs.size();
      for (std::size_t s : at[cur])
        if (!used[s]) {
          next = s;
          break;
        }
      if (next == segs.size()) break;
      used[next] = true;
      cur = segs[next].first == cur ? segs[next].second : segs[next].first;
      if (cur == start) {
        c.closed = true;
        break;
      }
      ids.push_back(cur);
    }
    for (long id : ids) c.points.push_back(edge_point.at(id));
    return c;
  };
  for (const auto& [id, list] : at)
    if (list.size() == 1 && !used[list[0]]) curves.push_back(walk(id));
  for (const auto& [id, list] : at)
    for (std::size_t s : list)
      if (!used[s]) curves.push_back(walk(id));

  const auto wfield = [&](const Point& x) {
    if (!g.contains(x)) return 0.0;
    const double v = interp(u, x);
    return which == BoundaryKind::gamma ? v : interp(*psi, x) - v;
  };
  std::vector<FreeBoundaryCurve> out;
  for (auto& c : curves) {
    if (c.points.size() < 3) continue;  // isolated specks carry no normal
    c.normals = normals(c, std::min<int>(window, static_cast<int>(c.points.size() - 1) / 2));
    detail::orient(c.normals, c.points, h, wfield);
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graph structure

struct GraphFit {
  Point center{};
  Point e{1.0, 0.0};
  double r = 0.0;
  double lipschitz_constant = 0.0;
  double residual = 0.0;
  std::size_t points = 0;
};

inline constexpr std::size_t kMinGraphPoints = 5;

/// In the frame (eta, xi) = ((p - x0).e_perp, (p - x0).e) the points must form
/// a graph xi = f(eta). Lipschitz constant = max pairwise slope over pairs at
/// least h/2 apart in eta; residual = max deviation from the least squares line.
inline GraphFit lipschitz_fit(const std::vector<Point>& pts, double h, const Point& x0, const Point& e_in, double r) {
  require(h > 0.0, ErrorKind::validation, "graph fit needs the grid spacing");
  const Point e = (1.0 / norm(e_in)) * e_in;
  const Point ep{-e[1], e[0]};
  std::vector<std::pair<double, double>> q;  // (eta, xi)
  for (const Point& p : pts) {
    const Point d = p - x0;
    if (dot(d, d) <= r * r) q.emplace_back(dot(d, ep), dot(d, e));
  }
  require(q.size() >= kMinGraphPoints, ErrorKind::validation, "graph fit needs at least 5 curve points in the ball");
  std::sort(q.begin(), q.end());
  GraphFit fit{x0, e, r, 0.0, 0.0, q.size()};
  for (std::size_t a = 0; a < q.size(); ++a)
    for (std::size_t b = a + 1; b < q.size(); ++b) {
      const double de = q[b].first - q[a].first, dx = std::abs(q[b].second - q[a].second);
      if (de < 0.5 * h) {
        if (dx > 2.0 * h)
          fail(ErrorKind::not_a_graph, "curve is not a graph over direction " + to_string(e) + " near " +
                                           to_string(x0 + q[a].first * ep + q[a].second * e));
        continue;
      }
      fit.lipschitz_constant = std::max(fit.lipschitz_constant, dx / de);
    }
  double se = 0, sx = 0, see = 0, sex = 0;
  const double n = static_cast<double>(q.size());
  for (const auto& [a, b] : q) {
    se += a;
    sx += b;
    see += a * a;
    sex += a * b;
  }
  const double den = n * see - se * se;
  const double slope = den > 0 ? (n * sex - se * sx) / den : 0.0;
  const double icpt = (sx - slope * se) / n;
  for (const auto& [a, b] : q) fit.residual = std::max(fit.residual, std::abs(b - (icpt + slope * a)));
  return fit;
}

inline GraphFit lipschitz_fit(const FreeBoundaryCurve& c, const Point& x0, const Point& e, double r) {
  return lipschitz_fit(c.points, c.h, x0, e, r);
}

// ---------------------------------------------------------------------------
// C^1 diagnostic

struct OscillationEntry {
  double r;
  double oscillation;  // max pairwise angle between normals in B_r(x0), radians
  std::size_t points;
};

struct C1Diagnostic {
  Point center{};
  std::vector<OscillationEntry> entries;  // radii in the order given (decreasing)
  bool decreasing = false;
};

inline constexpr double kOscillationFloor = 1e-6;

/// Oscillation of normals over shrinking balls. `decreasing` holds when each
/// step strictly lowers the oscillation or it already sits below the floor.
inline C1Diagnostic c1_diagnostic(const std::vector<FreeBoundaryCurve>& curves, const Point& x0,
                                  const std::vector<double>& radii) {
  require(!radii.empty(), ErrorKind::validation, "radii list is empty");
  for (std::size_t k = 1; k < radii.size(); ++k)
    require(radii[k] < radii[k - 1], ErrorKind::validation, "C1 diagnostic radii must decrease");
  C1Diagnostic d;
  d.center = x0;
  for (double r : radii) {
    std::vector<Point> nrm;
    for (const auto& c : curves)
      for (std::size_t i = 0; i < c.points.size(); ++i)
        if (norm(c.points[i] - x0) <= r) nrm.push_back(c.normals[i]);
    double osc = 0.0;
    for (std::size_t a = 0; a < nrm.size(); ++a)
      for (std::size_t b = a + 1; b < nrm.size(); ++b)
        osc = std::max(osc, std::acos(std::clamp(dot(nrm[a], nrm[b]), -1.0, 1.0)));
    d.entries.push_back({r, osc, nrm.size()});
  }
  d.decreasing = true;
  for (std::size_t k = 1; k < d.entries.size(); ++k) {
    const double prev = d.entries[k - 1].oscillation, cur = d.entries[k].oscillation;
    if (!(cur < prev || cur <= kOscillationFloor)) d.decreasing = false;
  }
  return d;
}

inline C1Diagnostic c1_diagnostic(const FreeBoundaryCurve& c, const Point& x0, const std::vector<double>& radii) {
  return c1_diagnostic(std::vector<FreeBoundaryCurve>{c}, x0, radii);
}

// ---------------------------------------------------------------------------
// Gamma^d as proximity of the two boundaries

struct ProximityEvent {
  Point gamma_point;
  Point gamma_psi_point;
  double distance;
};

inline std::vector<ProximityEvent> gamma_d_events(const std::vector<FreeBoundaryCurve>& gamma,
                                                  const std::vector<FreeBoundaryCurve>& gamma_psi, double h) {
  std::vector<ProximityEvent> out;
  for (const auto& c : gamma)
    for (const Point& p : c.points) {
      double best = std::numeric_limits<double>::infinity();
      Point who{};
      for (const auto& d : gamma_psi)
        for (const Point& q : d.points)
          if (norm(p - q) < best) {
            best = norm(p - q);
            who = q;
          }
      if (best <= 2.0 * h) out.push_back({p, who, best});
    }
  return out;
}

/// Curve point closest to x.
inline Point nearest_point(const std::vector<FreeBoundaryCurve>& curves, const Point& x) {
  require(!curves.empty(), ErrorKind::validation, "no free boundary curve to search");
  Point best = curves.front().points.front();
  for (const auto& c : curves)
    for (const Point& p : c.points)
      if (norm(p - x) < norm(best - x)) best = p;
  return best;
}

}  // namespace fbl
