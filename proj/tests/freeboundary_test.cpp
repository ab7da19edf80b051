#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fbl/exact.hpp"
#include "fbl/freeboundary.hpp"

namespace fbl {
namespace {

constexpr double kPi = std::numbers::pi;

Grid square(double h, double half = 1.0) { return Grid::box({-half, -half}, {half, half}, h); }

PartitionMask mask_of(const ScalarField& u, const ScalarField* psi = nullptr) {
  const double h = u.grid().h();
  return classify(u, psi, 0.25 * h * h);
}

FreeBoundaryCurve polyline(std::vector<Point> pts, double h, bool closed = false) {
  FreeBoundaryCurve c;
  c.points = std::move(pts);
  c.h = h;
  c.closed = closed;
  return c;
}

std::vector<Point> circle_points(Point c, double R, double h) {
  std::vector<Point> pts;
  const int n = static_cast<int>(std::ceil(2 * kPi * R / h));
  for (int k = 0; k < n; ++k) {
    const double t = 2 * kPi * k / n;
    pts.push_back(c + R * Point{std::cos(t), std::sin(t)});
  }
  return pts;
}

TEST(Extract, HalfspaceGivesTheAxis) {
  const double h = 1.0 / 64;
  const ScalarField u = sample(square(h), ClosedForm::halfspace(1.0, {1, 0}));
  const auto curves = extract(u, mask_of(u), BoundaryKind::gamma);
  ASSERT_EQ(curves.size(), 1u);
  EXPECT_FALSE(curves[0].closed);
  for (std::size_t i = 0; i < curves[0].points.size(); ++i) {
    EXPECT_LE(std::abs(curves[0].points[i][0]), h * h);
    EXPECT_NEAR(curves[0].normals[i][0], 1.0, 1e-8);  // toward u > 0
  }
  for (std::size_t i = 1; i < curves[0].points.size(); ++i)
    EXPECT_LE(norm(curves[0].points[i] - curves[0].points[i - 1]), 2 * h);

  const ScalarField z = sample(square(h), ClosedForm::zero());
  EXPECT_TRUE(extract(z, mask_of(z), BoundaryKind::gamma).empty());
  EXPECT_THROW(extract(u, mask_of(u), BoundaryKind::gamma_psi), Error);
}

TEST(Extract, SubgridOffsetRecovered) {
  const double h = 1.0 / 64;
  for (double alpha : {0.25, 0.5, 0.75}) {
    const double s = alpha * h;
    const ScalarField u = sample(square(h), [&](const Point& x) {
      const double d = std::max(0.0, x[0] - s);
      return 0.5 * d * d;
    });
    const auto curves = extract(u, mask_of(u), BoundaryKind::gamma);
    ASSERT_EQ(curves.size(), 1u);
    for (const Point& p : curves[0].points) EXPECT_NEAR(p[0], s, 0.1 * h) << alpha;
  }
}

TEST(Extract, ConsistentWithLabelChanges) {
  const double h = 1.0 / 64;
  const ScalarField u = sample(square(h), ClosedForm::radial_obstacle({-2, 0}, 2.0, 1.0));
  const PartitionMask m = mask_of(u);
  const auto curves = extract(u, m, BoundaryKind::gamma);
  ASSERT_FALSE(curves.empty());
  const Grid& g = u.grid();
  const auto crossing_cell = [&](int i, int j) {
    const int z = (m.at(i, j) == Label::zero) + (m.at(i + 1, j) == Label::zero) +
                  (m.at(i, j + 1) == Label::zero) + (m.at(i + 1, j + 1) == Label::zero);
    return z > 0 && z < 4;
  };
  std::vector<Point> centers;
  for (int j = 1; j + 2 < g.ny(); ++j)
    for (int i = 1; i + 2 < g.nx(); ++i)
      if (crossing_cell(i, j)) centers.push_back(g.node(i, j) + Point{0.5 * h, 0.5 * h});
  for (const auto& c : curves)
    for (const Point& p : c.points) {
      double best = 1e9;
      for (const Point& q : centers) best = std::min(best, std::max(std::abs(p[0] - q[0]), std::abs(p[1] - q[1])));
      EXPECT_LE(best, 1.5 * h);  // within one cell of a crossed cell
    }
  for (const Point& q : centers) {
    if (std::max(std::abs(q[0]), std::abs(q[1])) > 0.8) continue;
    double best = 1e9;
    for (const auto& c : curves)
      for (const Point& p : c.points) best = std::min(best, norm(p - q));
    EXPECT_LE(best, 2 * h);
  }
  // On the circle of radius 2 about (-2, 0).
  for (const auto& c : curves)
    for (const Point& p : c.points) EXPECT_NEAR(norm(p - Point{-2, 0}), 2.0, 0.5 * h);  // curvature error
}

TEST(Extract, GammaPsiIncludesCommonZeroSet) {
  // u and psi vanish on the same disk: {u = psi} is the disk, so Gamma^psi
  // is its boundary circle and every Gamma point is a double point.
  const double h = 1.0 / 64;
  const ScalarField u = sample(square(h), ClosedForm::radial_obstacle({-2, 0}, 2.0, 1.0));
  const ScalarField psi = sample(square(h), ClosedForm::disk_psi({-2, 0}, 2.0, 2.0));
  const PartitionMask m = mask_of(u, &psi);
  const auto gam = extract(u, m, BoundaryKind::gamma);
  const auto gps = extract(u, m, BoundaryKind::gamma_psi, &psi);
  ASSERT_EQ(gps.size(), 1u);
  for (const Point& p : gps[0].points) EXPECT_NEAR(norm(p - Point{-2, 0}), 2.0, h);
  std::size_t n = 0;
  for (const auto& c : gam) n += c.points.size();
  EXPECT_EQ(gamma_d_events(gam, gps, h).size(), n);
}

TEST(Extract, ExtrudedOneDimensionalInstance) {
  const double h = 1.0 / 64, r = 1.140625;
  const Obstacle1D psi1 = Obstacle1D::model(2.0);
  const Exact1D ex = solve_1d_exact(1.0, psi1, -1.0, r, 0.0, 1.0);
  ASSERT_EQ(ex.gamma_psi.size(), 2u);
  const Grid g = Grid::box({-1.0, -0.25}, {r, 0.25}, h);
  const Problem p = Problem::from_forms(g, ClosedForm::constant(1.0), psi1.as_form(),
                                        ClosedForm::piecewise_1d(ex.u), 1.0, 2.0);
  SolverConfig cfg;
  cfg.omega = near_optimal_omega(g);
  const Solution s = solve(p, cfg);
  const auto gam = extract(s.u, s.mask, BoundaryKind::gamma);
  const auto gps = extract(s.u, s.mask, BoundaryKind::gamma_psi, &p.psi);
  ASSERT_FALSE(gam.empty());
  ASSERT_FALSE(gps.empty());
  for (const auto& c : gam)
    for (const Point& q : c.points) EXPECT_NEAR(q[0], ex.gamma[0], 2 * h);
  // {u = psi} is (-1, c2]: psi vanishes with u left of 0, so the only
  // boundary is where the contact set leaves the obstacle.
  for (const auto& c : gps)
    for (const Point& q : c.points) EXPECT_NEAR(q[0], ex.gamma_psi[1], 2 * h);
  for (const auto& c : gam) {
    const GraphFit f = lipschitz_fit(c, {ex.gamma[0], 0.0}, {1, 0}, 0.2);
    EXPECT_LE(f.lipschitz_constant, 1e-6);  // vertical within the grid
  }
}

TEST(Normals, LineAndCircle) {
  const double h = 1.0 / 64;
  std::vector<Point> line;
  for (int k = 0; k < 30; ++k) line.push_back({0.3 + 0.6 * k * h, -0.2 + 0.8 * k * h});
  const auto nl = normals(polyline(line, h), 3);
  for (const Point& n : nl) {
    EXPECT_NEAR(std::abs(dot(n, Point{-0.8, 0.6})), 1.0, 1e-8);
    EXPECT_NEAR(norm(n), 1.0, 1e-12);
  }
  const double R = 0.5;
  const auto pts = circle_points({0.1, 0.2}, R, h);
  const auto nc = normals(polyline(pts, h, true), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point radial = (1.0 / R) * (pts[i] - Point{0.1, 0.2});
    EXPECT_NEAR(std::abs(dot(nc[i], radial)), 1.0, h / R);
  }
  EXPECT_THROW(normals(polyline({{0, 0}, {h, 0}}, h), 1), Error);
  EXPECT_THROW(normals(polyline(line, h), 0), Error);
  EXPECT_THROW(normals(polyline({{0, 0}, {0, 0}, {0, 0}}, h), 1), Error);
}

TEST(LipschitzFit, Examples) {
  const double h = 1.0 / 64;
  std::vector<Point> vert, diag;
  for (int k = -10; k <= 10; ++k) {
    vert.push_back({0.0, k * h});
    diag.push_back({k * h, k * h});
  }
  EXPECT_NEAR(lipschitz_fit(vert, h, {0, 0}, {1, 0}, 0.5).lipschitz_constant, 0.0, 1e-8);
  // A 45 degree line seen over the e1 frame has slope one.
  const GraphFit d = lipschitz_fit(diag, h, {0, 0}, {1, 0}, 0.5);
  EXPECT_NEAR(d.lipschitz_constant, 1.0, 1e-6);
  EXPECT_LE(d.residual, 1e-12);
  EXPECT_THROW(lipschitz_fit(vert, h, {0, 0}, {1, 0}, 1.5 * h), Error);  // 3 points

  const auto circ = circle_points({0, 0}, 0.3, h);
  try {
    lipschitz_fit(circ, h, {0, 0}, {1, 0}, 0.5);
    FAIL() << "expected NOT_A_GRAPH";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::not_a_graph);
  }
}

TEST(LipschitzFit, FrameCovariant) {
  const double h = 1.0 / 64;
  std::vector<Point> pts;
  for (int k = -15; k <= 15; ++k) {
    const double t = k * h;
    pts.push_back({0.4 * t * t + 0.1 * t, t});
  }
  const GraphFit base = lipschitz_fit(pts, h, {0, 0}, {1, 0}, 0.3);
  for (double ang : {0.3, 1.1, 2.5}) {
    const double c = std::cos(ang), s = std::sin(ang);
    std::vector<Point> rot;
    for (const Point& p : pts) rot.push_back({c * p[0] - s * p[1], s * p[0] + c * p[1]});
    const GraphFit f = lipschitz_fit(rot, h, {0, 0}, {c, s}, 0.3);
    EXPECT_NEAR(f.lipschitz_constant, base.lipschitz_constant, 1e-6);
  }
}

TEST(C1Diagnostic, LineCircleCorner) {
  const double h = 1.0 / 256;
  const std::vector<double> radii{0.3, 0.2, 0.1, 0.05};
  std::vector<Point> line;
  for (int k = -150; k <= 150; ++k) line.push_back({0.0, k * h});
  FreeBoundaryCurve lc = polyline(line, h);
  lc.normals = normals(lc, 3);
  const C1Diagnostic dl = c1_diagnostic(lc, {0, 0}, radii);
  for (const auto& e : dl.entries) EXPECT_LE(e.oscillation, 1e-8);
  EXPECT_TRUE(dl.decreasing);

  // Circle of radius R through the origin: oscillation ~ 2 asin(r / 2R) * 2.
  const double R = 2.0;
  FreeBoundaryCurve cc = polyline(circle_points({-R, 0}, R, h), h, true);
  cc.normals = normals(cc, 3);
  for (std::size_t i = 0; i < cc.points.size(); ++i)
    if (dot(cc.normals[i], cc.points[i] - Point{-R, 0}) < 0) cc.normals[i] = -1.0 * cc.normals[i];
  const C1Diagnostic dc = c1_diagnostic(cc, {0, 0}, radii);
  for (const auto& e : dc.entries) EXPECT_NEAR(e.oscillation, 4 * std::asin(e.r / (2 * R)), 0.02);
  EXPECT_TRUE(dc.decreasing);

  // Corner mask: Lambda = {x1 <= -|x2|}, u = half squared distance to it.
  const ScalarField u = sample(square(h), [](const Point& x) {
    // The wedge is the quadrant {a <= 0, b <= 0} in rotated coordinates.
    const double s = std::sqrt(0.5);
    const double a = std::max(0.0, s * (x[0] + x[1])), b = std::max(0.0, s * (x[0] - x[1]));
    const double d = std::hypot(a, b);
    return 0.5 * d * d;
  });
  const auto corner = extract(u, mask_of(u), BoundaryKind::gamma);
  const C1Diagnostic dk = c1_diagnostic(corner, {0, 0}, radii);
  for (const auto& e : dk.entries) EXPECT_GE(e.oscillation, 0.9 * kPi / 2);
  EXPECT_FALSE(dk.decreasing);
}

TEST(GammaD, ProximityEvents) {
  const double h = 1.0 / 64;
  FreeBoundaryCurve a = polyline({{0, 0}, {0, h}, {0, 2 * h}}, h);
  FreeBoundaryCurve b = polyline({{h, 2 * h}, {4 * h, 2 * h}}, h);
  const auto ev = gamma_d_events({a}, {b}, h);
  ASSERT_EQ(ev.size(), 2u);  // (0, h) and (0, 2h) lie within 2h of (h, 2h)
  EXPECT_NEAR(ev[1].distance, h, 1e-15);
}

}  // namespace
}  // namespace fbl
