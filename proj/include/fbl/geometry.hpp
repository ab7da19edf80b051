#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fbl/grid.hpp"

namespace fbl {

inline double cross(const Point& o, const Point& a, const Point& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

/// Andrew's monotone chain. Counter-clockwise, collinear points dropped.
inline std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Least distance between two parallel lines enclosing the points.
/// Rotating calipers: for each hull edge, the farthest vertex gives the
/// width in that edge's normal direction; the minimum over edges is exact.
inline double minimal_width(const std::vector<Point>& pts) {
  const std::vector<Point> h = convex_hull(pts);
  const std::size_t n = h.size();
  if (n < 3) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  std::size_t j = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = h[i];
    const Point& b = h[(i + 1) % n];
    while (cross(a, b, h[(j + 1) % n]) > cross(a, b, h[j])) j = (j + 1) % n;
    best = std::min(best, cross(a, b, h[j]) / norm(b - a));
  }
  return best;
}

}  // namespace fbl
