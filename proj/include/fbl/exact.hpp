#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fbl/error.hpp"
#include "fbl/grid.hpp"

namespace fbl {

/// Region a piece of a 1D solution belongs to.
enum class Region { zero, open, contact };

inline const char* to_string(Region r) {
  switch (r) {
    case Region::zero: return "ZERO";
    case Region::open: return "OPEN";
    case Region::contact: return "CONTACT";
  }
  return "?";
}

/// C^{1,1} piecewise quadratic on [breaks.front(), breaks.back()], piece p
/// equal to alpha t^2 + beta t + gamma (absolute t) on [breaks[p], breaks[p+1]].
/// Evaluation outside the range extends the end pieces.
class PiecewiseQuadratic1D {
 public:
  struct Piece {
    double alpha, beta, gamma;
  };

  PiecewiseQuadratic1D() = default;
  PiecewiseQuadratic1D(std::vector<double> breaks, std::vector<Piece> pieces,
                       double match_tol = 1e-9)
      : breaks_(std::move(breaks)), pieces_(std::move(pieces)) {
    require(breaks_.size() >= 2 && pieces_.size() + 1 == breaks_.size(), ErrorKind::validation,
            "piecewise quadratic needs n+1 breakpoints for n pieces");
    for (std::size_t p = 0; p + 1 < breaks_.size(); ++p)
      require(breaks_[p] < breaks_[p + 1], ErrorKind::validation,
              "breakpoints must be strictly increasing");
    for (std::size_t p = 1; p + 1 < breaks_.size(); ++p) {
      const double t = breaks_[p];
      const double scale = 1.0 + std::abs(value_of(pieces_[p - 1], t));
      require(std::abs(value_of(pieces_[p - 1], t) - value_of(pieces_[p], t)) <= match_tol * scale &&
                  std::abs(slope_of(pieces_[p - 1], t) - slope_of(pieces_[p], t)) <=
                      match_tol * (1.0 + std::abs(slope_of(pieces_[p], t))),
              ErrorKind::validation, "piecewise quadratic is not C1 at a breakpoint");
    }
  }

  const std::vector<double>& breaks() const { return breaks_; }
  const std::vector<Piece>& pieces() const { return pieces_; }
  double lo() const { return breaks_.front(); }
  double hi() const { return breaks_.back(); }

  std::size_t piece_index(double t) const {
    const auto it = std::upper_bound(breaks_.begin() + 1, breaks_.end() - 1, t);
    return static_cast<std::size_t>(it - (breaks_.begin() + 1));
  }
  double operator()(double t) const { return value_of(pieces_[piece_index(t)], t); }
  double derivative(double t) const { return slope_of(pieces_[piece_index(t)], t); }
  double second_derivative(double t) const { return 2.0 * pieces_[piece_index(t)].alpha; }
  double second_derivative_sup() const {
    double m = 0.0;
    for (const auto& p : pieces_) m = std::max(m, std::abs(2.0 * p.alpha));
    return m;
  }

 private:
  static double value_of(const Piece& p, double t) { return (p.alpha * t + p.beta) * t + p.gamma; }
  static double slope_of(const Piece& p, double t) { return 2.0 * p.alpha * t + p.beta; }

  std::vector<double> breaks_;
  std::vector<Piece> pieces_;
};

/// Registered closed-form fields. Parameters per family:
///   zero | constant(c) | affine(c, g) | quadratic(c, g, hess=[hxx, hxy, hyy])
///   halfspace(k, e): (k/2)((x.e)^+)^2 | model_psi(a, e): (a/2)((x.e)^+)^2, a > 1
///   piecewise1d(breaks, coeffs): piecewise quadratic in x1
///   radial_obstacle(center, R, f): radial 2D solution of Lap u = f chi{u>0} with
///       zero set the disk B_R(center): f[(rho^2 - R^2)/4 - (R^2/2) ln(rho/R)]^+
///   disk_psi(center, R, a): (a/2)((|x - center| - R)^+)^2
///   blend(lo, hi, axis, t0, t1): lo + s(x_axis)(hi - lo), s the C1 smoothstep on [t0, t1]
///   wedge_psi(apex, e, angle, a): (a/2) dist(x, W)^2, W the closed cone at apex opening
///       toward -e with half-angle `angle` in (0, pi/2]
class ClosedForm {
 public:
  enum class Family {
    zero,
    constant,
    affine,
    quadratic_poly,
    halfspace,
    model_psi,
    piecewise_quadratic_1d,
    radial_obstacle,
    disk_psi,
    blend,
    wedge_psi,
  };

  static ClosedForm zero() { return ClosedForm(Family::zero); }
  static ClosedForm constant(double c) {
    ClosedForm f(Family::constant);
    f.scalar_ = c;
    return f;
  }
  static ClosedForm affine(double c, Point g) {
    ClosedForm f(Family::affine);
    f.scalar_ = c;
    f.vec_ = g;
    return f;
  }
  static ClosedForm quadratic(double c, Point g, std::array<double, 3> hess) {
    ClosedForm f(Family::quadratic_poly);
    f.scalar_ = c;
    f.vec_ = g;
    f.hess_ = hess;
    return f;
  }
  static ClosedForm halfspace(double k, Point e) {
    require(k > 0.0, ErrorKind::validation, "halfspace: k must be positive");
    ClosedForm f(Family::halfspace);
    f.scalar_ = k;
    f.vec_ = unit(e);
    return f;
  }
  static ClosedForm model_psi(double a, Point e) {
    require(a > 1.0, ErrorKind::validation, "model_psi: a must exceed 1");
    ClosedForm f(Family::model_psi);
    f.scalar_ = a;
    f.vec_ = unit(e);
    return f;
  }
  static ClosedForm piecewise_1d(PiecewiseQuadratic1D pq) {
    ClosedForm f(Family::piecewise_quadratic_1d);
    f.pq_ = std::make_shared<const PiecewiseQuadratic1D>(std::move(pq));
    return f;
  }
  static ClosedForm radial_obstacle(Point center, double radius, double source) {
    require(radius > 0.0 && source > 0.0, ErrorKind::validation,
            "radial_obstacle: R and f must be positive");
    ClosedForm f(Family::radial_obstacle);
    f.vec_ = center;
    f.scalar_ = radius;
    f.scalar2_ = source;
    return f;
  }
  static ClosedForm disk_psi(Point center, double radius, double a) {
    require(radius > 0.0 && a > 0.0, ErrorKind::validation, "disk_psi: R and a must be positive");
    ClosedForm f(Family::disk_psi);
    f.vec_ = center;
    f.scalar_ = radius;
    f.scalar2_ = a;
    return f;
  }
  static ClosedForm blend(ClosedForm lo, ClosedForm hi, int axis, double t0, double t1) {
    require(axis == 0 || axis == 1, ErrorKind::validation, "blend: axis must be 0 or 1");
    require(t1 > t0, ErrorKind::validation, "blend: need t1 > t0");
    ClosedForm f(Family::blend);
    f.lo_ = std::make_shared<const ClosedForm>(std::move(lo));
    f.hi_ = std::make_shared<const ClosedForm>(std::move(hi));
    f.axis_ = axis;
    f.scalar_ = t0;
    f.scalar2_ = t1;
    return f;
  }

  static ClosedForm wedge_psi(Point apex, Point e, double angle, double a) {
    require(angle > 0.0 && angle <= 0.5 * std::numbers::pi + 1e-15 && a > 0.0, ErrorKind::validation,
            "wedge_psi: need angle in (0, pi/2] and a > 0");
    ClosedForm f(Family::wedge_psi);
    f.vec_ = apex;
    f.vec2_ = unit(e);
    f.scalar_ = a;
    f.scalar2_ = angle;
    return f;
  }

  Family family() const { return family_; }

  double operator()(const Point& x) const {
    switch (family_) {
      case Family::zero: return 0.0;
      case Family::constant: return scalar_;
      case Family::affine: return scalar_ + dot(vec_, x);
      case Family::quadratic_poly:
        return scalar_ + dot(vec_, x) +
               0.5 * (hess_[0] * x[0] * x[0] + 2.0 * hess_[1] * x[0] * x[1] + hess_[2] * x[1] * x[1]);
      case Family::halfspace:
      case Family::model_psi: {
        const double s = std::max(0.0, dot(vec_, x));
        return 0.5 * scalar_ * s * s;
      }
      case Family::piecewise_quadratic_1d: return (*pq_)(x[0]);
      case Family::radial_obstacle: {
        const double rho = norm(x - vec_);
        const double R = scalar_;
        if (rho <= R) return 0.0;
        return scalar2_ * ((rho * rho - R * R) / 4.0 - 0.5 * R * R * std::log(rho / R));
      }
      case Family::disk_psi: {
        const double d = std::max(0.0, norm(x - vec_) - scalar_);
        return 0.5 * scalar2_ * d * d;
      }
      case Family::blend: {
        const double s = smoothstep(x[axis_]);
        const double lo = (*lo_)(x);
        return lo + s * ((*hi_)(x) - lo);
      }
      case Family::wedge_psi: {
        const Point d = x - wedge_nearest(x);
        return 0.5 * scalar_ * dot(d, d);
      }
    }
    return 0.0;
  }

  /// Exact gradient (used by oracles).
  Point gradient(const Point& x) const {
    switch (family_) {
      case Family::zero:
      case Family::constant: return {0.0, 0.0};
      case Family::affine: return vec_;
      case Family::quadratic_poly:
        return {vec_[0] + hess_[0] * x[0] + hess_[1] * x[1], vec_[1] + hess_[1] * x[0] + hess_[2] * x[1]};
      case Family::halfspace:
      case Family::model_psi: return (scalar_ * std::max(0.0, dot(vec_, x))) * vec_;
      case Family::piecewise_quadratic_1d: return {pq_->derivative(x[0]), 0.0};
      case Family::radial_obstacle: {
        const Point d = x - vec_;
        const double rho = norm(d);
        const double R = scalar_;
        if (rho <= R) return {0.0, 0.0};
        const double du = scalar2_ * (rho / 2.0 - R * R / (2.0 * rho));
        return (du / rho) * d;
      }
      case Family::disk_psi: {
        const Point d = x - vec_;
        const double rho = norm(d);
        const double s = rho - scalar_;
        if (s <= 0.0) return {0.0, 0.0};
        return (scalar2_ * s / rho) * d;
      }
      case Family::blend: {
        const double s = smoothstep(x[axis_]);
        const double lo = (*lo_)(x), hi = (*hi_)(x);
        Point g = (*lo_).gradient(x) + s * ((*hi_).gradient(x) - (*lo_).gradient(x));
        g[axis_] += smoothstep_slope(x[axis_]) * (hi - lo);
        return g;
      }
      case Family::wedge_psi: return scalar_ * (x - wedge_nearest(x));
    }
    return {0.0, 0.0};
  }

  /// sup over R^n of the spectral norm of D^2 (the M of P_infinity(M)).
  double second_derivative_sup() const {
    switch (family_) {
      case Family::zero:
      case Family::constant:
      case Family::affine: return 0.0;
      case Family::quadratic_poly: {
        const double m = 0.5 * (hess_[0] + hess_[2]);
        const double d = std::hypot(0.5 * (hess_[0] - hess_[2]), hess_[1]);
        return std::max(std::abs(m + d), std::abs(m - d));
      }
      case Family::halfspace:
      case Family::model_psi: return scalar_;
      case Family::piecewise_quadratic_1d: return pq_->second_derivative_sup();
      case Family::radial_obstacle: return scalar2_;
      case Family::disk_psi: return scalar2_;
      case Family::wedge_psi: return scalar_;
      case Family::blend: break;
    }
    fail(ErrorKind::validation, "second_derivative_sup is not available for blend forms");
  }

  /// Config-file syntax; parse_closed_form(describe()) reproduces the form.
  std::string describe() const {
    std::ostringstream os;
    switch (family_) {
      case Family::zero: os << "zero"; break;
      case Family::constant: os << "constant(c=" << num(scalar_) << ")"; break;
      case Family::affine: os << "affine(c=" << num(scalar_) << ", g=" << vec(vec_) << ")"; break;
      case Family::quadratic_poly:
        os << "quadratic(c=" << num(scalar_) << ", g=" << vec(vec_) << ", hess=[" << num(hess_[0])
           << ", " << num(hess_[1]) << ", " << num(hess_[2]) << "])";
        break;
      case Family::halfspace: os << "halfspace(k=" << num(scalar_) << ", e=" << vec(vec_) << ")"; break;
      case Family::model_psi: os << "model_psi(a=" << num(scalar_) << ", e=" << vec(vec_) << ")"; break;
      case Family::piecewise_quadratic_1d: {
        os << "piecewise1d(breaks=[";
        for (std::size_t i = 0; i < pq_->breaks().size(); ++i) os << (i ? ", " : "") << num(pq_->breaks()[i]);
        os << "], coeffs=[";
        for (std::size_t i = 0; i < pq_->pieces().size(); ++i) {
          const auto& p = pq_->pieces()[i];
          os << (i ? ", " : "") << num(p.alpha) << ", " << num(p.beta) << ", " << num(p.gamma);
        }
        os << "])";
        break;
      }
      case Family::radial_obstacle:
        os << "radial_obstacle(center=" << vec(vec_) << ", R=" << num(scalar_) << ", f=" << num(scalar2_) << ")";
        break;
      case Family::disk_psi:
        os << "disk_psi(center=" << vec(vec_) << ", R=" << num(scalar_) << ", a=" << num(scalar2_) << ")";
        break;
      case Family::blend:
        os << "blend(lo=" << lo_->describe() << ", hi=" << hi_->describe() << ", axis=" << axis_
           << ", t0=" << num(scalar_) << ", t1=" << num(scalar2_) << ")";
        break;
      case Family::wedge_psi:
        os << "wedge_psi(apex=" << vec(vec_) << ", e=" << vec(vec2_) << ", angle=" << num(scalar2_)
           << ", a=" << num(scalar_) << ")";
        break;
    }
    return os.str();
  }

  const Point& direction() const { return vec_; }
  double coefficient() const { return scalar_; }

 private:
  explicit ClosedForm(Family f) : family_(f) {}

  static Point unit(Point e) {
    const double n = norm(e);
    require(n > 0.0 && std::isfinite(n), ErrorKind::validation, "direction must be nonzero");
    if (std::abs(n - 1.0) <= 1e-15) return e;  // keep describe() round trips bit-exact
    return (1.0 / n) * e;
  }
  // Nearest point of the wedge: x itself inside, the apex beyond both side
  // normals, otherwise the projection onto the closer boundary ray.
  Point wedge_nearest(const Point& x) const {
    const Point y = x - vec_;
    const double along = -dot(y, vec2_);
    const Point perp{-vec2_[1], vec2_[0]};
    const double side = dot(y, perp);
    const double phi = std::atan2(std::abs(side), along);
    if (phi <= scalar2_) return x;
    if (phi >= scalar2_ + 0.5 * std::numbers::pi) return vec_;
    const double sgn = side >= 0.0 ? 1.0 : -1.0;
    const Point ray = std::cos(scalar2_) * (-1.0 * vec2_) + (sgn * std::sin(scalar2_)) * perp;
    return vec_ + dot(y, ray) * ray;
  }
  double smoothstep(double t) const {
    const double s = std::clamp((t - scalar_) / (scalar2_ - scalar_), 0.0, 1.0);
    return s * s * (3.0 - 2.0 * s);
  }
  double smoothstep_slope(double t) const {
    const double w = scalar2_ - scalar_;
    const double s = (t - scalar_) / w;
    if (s <= 0.0 || s >= 1.0) return 0.0;
    return 6.0 * s * (1.0 - s) / w;
  }
  static std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
  static std::string vec(const Point& p) { return "[" + num(p[0]) + ", " + num(p[1]) + "]"; }

  Family family_;
  double scalar_ = 0.0;
  double scalar2_ = 0.0;
  Point vec_{0.0, 0.0};
  Point vec2_{0.0, 0.0};
  std::array<double, 3> hess_{0.0, 0.0, 0.0};
  int axis_ = 0;
  std::shared_ptr<const PiecewiseQuadratic1D> pq_;
  std::shared_ptr<const ClosedForm> lo_, hi_;
};

inline ScalarField sample(const Grid& grid, const ClosedForm& form) {
  return sample(grid, [&](const Point& x) { return form(x); });
}

namespace detail {

// Recursive-descent parser for `name(key=value, ...)`, values being numbers,
// bracketed number lists, or nested forms.
class FormParser {
 public:
  explicit FormParser(std::string_view text) : s_(text) {}

  ClosedForm parse() {
    ClosedForm f = form();
    skip();
    if (pos_ != s_.size()) error("trailing characters");
    return f;
  }

 private:
  struct Value {
    std::vector<double> numbers;
    std::shared_ptr<ClosedForm> form;
  };

  ClosedForm form() {
    const std::string name = ident();
    std::map<std::string, Value> args;
    skip();
    if (peek() == '(') {
      ++pos_;
      skip();
      while (peek() != ')') {
        const std::string key = ident();
        skip();
        expect('=');
        args[key] = value();
        skip();
        if (peek() == ',') {
          ++pos_;
          skip();
        } else if (peek() != ')') {
          error("expected ',' or ')'");
        }
      }
      ++pos_;
    }
    return build(name, args);
  }

  Value value() {
    skip();
    Value v;
    if (peek() == '[') {
      ++pos_;
      skip();
      while (peek() != ']') {
        v.numbers.push_back(number());
        skip();
        if (peek() == ',') ++pos_;
        skip();
      }
      ++pos_;
    } else if (std::isalpha(static_cast<unsigned char>(peek()))) {
      v.form = std::make_shared<ClosedForm>(form());
    } else {
      v.numbers.push_back(number());
    }
    return v;
  }

  ClosedForm build(const std::string& name, std::map<std::string, Value>& args) {
    const auto scalar = [&](const char* key, std::optional<double> dflt = std::nullopt) {
      const auto it = args.find(key);
      if (it == args.end()) {
        if (dflt) return *dflt;
        error(name + ": missing parameter '" + key + "'");
      }
      if (it->second.numbers.size() != 1) error(name + ": parameter '" + key + "' must be a number");
      return it->second.numbers[0];
    };
    const auto point = [&](const char* key) {
      const auto it = args.find(key);
      if (it == args.end()) error(name + ": missing parameter '" + key + "'");
      const auto& n = it->second.numbers;
      if (n.empty() || n.size() > 2) error(name + ": parameter '" + key + "' must have 1 or 2 entries");
      return Point{n[0], n.size() > 1 ? n[1] : 0.0};
    };
    const auto list = [&](const char* key) {
      const auto it = args.find(key);
      if (it == args.end()) error(name + ": missing parameter '" + key + "'");
      return it->second.numbers;
    };
    const auto sub = [&](const char* key) {
      const auto it = args.find(key);
      if (it == args.end() || !it->second.form) error(name + ": parameter '" + key + "' must be a form");
      return *it->second.form;
    };
    if (name == "zero") return ClosedForm::zero();
    if (name == "constant") return ClosedForm::constant(scalar("c"));
    if (name == "affine") return ClosedForm::affine(scalar("c", 0.0), point("g"));
    if (name == "quadratic") {
      const auto h = list("hess");
      if (h.size() != 3) error("quadratic: hess must be [hxx, hxy, hyy]");
      return ClosedForm::quadratic(scalar("c", 0.0), args.count("g") ? point("g") : Point{0, 0},
                                   {h[0], h[1], h[2]});
    }
    if (name == "halfspace") return ClosedForm::halfspace(scalar("k"), point("e"));
    if (name == "model_psi") return ClosedForm::model_psi(scalar("a"), point("e"));
    if (name == "piecewise1d") {
      const auto b = list("breaks");
      const auto c = list("coeffs");
      if (b.size() < 2 || c.size() != 3 * (b.size() - 1)) error("piecewise1d: need 3 coeffs per piece");
      std::vector<PiecewiseQuadratic1D::Piece> pieces;
      for (std::size_t i = 0; i + 1 < b.size(); ++i) pieces.push_back({c[3 * i], c[3 * i + 1], c[3 * i + 2]});
      return ClosedForm::piecewise_1d(PiecewiseQuadratic1D(b, pieces));
    }
    if (name == "radial_obstacle")
      return ClosedForm::radial_obstacle(point("center"), scalar("R"), scalar("f", 1.0));
    if (name == "disk_psi") return ClosedForm::disk_psi(point("center"), scalar("R"), scalar("a"));
    if (name == "blend")
      return ClosedForm::blend(sub("lo"), sub("hi"), static_cast<int>(scalar("axis", 0.0)), scalar("t0"),
                               scalar("t1"));
    if (name == "wedge_psi")
      return ClosedForm::wedge_psi(point("apex"), point("e"), scalar("angle"), scalar("a"));
    error("unknown closed form '" + name + "'");
  }

  std::string ident() {
    skip();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    if (start == pos_) error("expected identifier");
    return std::string(s_.substr(start, pos_ - start));
  }
  double number() {
    skip();
    const std::string rest(s_.substr(pos_));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(rest, &used);
    } catch (const std::exception&) {
      error("expected number");
    }
    pos_ += used;
    return v;
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void expect(char c) {
    if (peek() != c) error(std::string("expected '") + c + "'");
    ++pos_;
  }
  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorKind::validation, "closed form '" + std::string(s_) + "': " + what);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline ClosedForm parse_closed_form(std::string_view text) { return detail::FormParser(text).parse(); }

// ---------------------------------------------------------------------------
// 1D exact solutions by quadratic-arc patching.

/// Exact 1D double-obstacle solution: the patched profile, the region of each
/// piece, and the free-boundary abscissae (ZERO/non-ZERO and CONTACT/OPEN
/// transitions inside the open interval).
struct Exact1D {
  PiecewiseQuadratic1D u;
  std::vector<Region> regions;
  std::vector<double> gamma;      // boundary of {u = 0}
  std::vector<double> gamma_psi;  // boundary of {u = psi > 0}
};

/// Upper obstacle accepted by the oracle: (a/2)((s (t - t0))^+)^2 with
/// s = +1 or -1, or a constant level.
struct Obstacle1D {
  enum class Kind { model, constant } kind = Kind::model;
  double a = 2.0;
  double t0 = 0.0;
  int side = +1;
  double level = 0.0;

  static Obstacle1D model(double a, double t0 = 0.0, int side = +1) {
    return {Kind::model, a, t0, side, 0.0};
  }
  static Obstacle1D constant(double level) { return {Kind::constant, 0.0, 0.0, +1, level}; }

  double operator()(double t) const {
    if (kind == Kind::constant) return level;
    const double s = std::max(0.0, side * (t - t0));
    return 0.5 * a * s * s;
  }
  ClosedForm as_form() const {
    if (kind == Kind::constant) return ClosedForm::constant(level);
    return shifted_model();
  }

 private:
  ClosedForm shifted_model() const {
    // (a/2)(side (t - t0))^2 on the active side, zero elsewhere.
    const double al = 0.5 * a;
    const double big = 1e6;
    if (side > 0)
      return ClosedForm::piecewise_1d(PiecewiseQuadratic1D(
          {t0 - big, t0, t0 + big}, {{0.0, 0.0, 0.0}, {al, -2.0 * al * t0, al * t0 * t0}}));
    return ClosedForm::piecewise_1d(PiecewiseQuadratic1D(
        {t0 - big, t0, t0 + big}, {{al, -2.0 * al * t0, al * t0 * t0}, {0.0, 0.0, 0.0}}));
  }
};

namespace detail {

inline PiecewiseQuadratic1D::Piece arc_from_vertex(double curvature, double vertex, double base) {
  // (curvature/2)(t - vertex)^2 + base
  const double al = 0.5 * curvature;
  return {al, -2.0 * al * vertex, al * vertex * vertex + base};
}

inline PiecewiseQuadratic1D::Piece tangent_arc(double curvature, double t, double value, double slope) {
  // value + slope (s - t) + (curvature/2)(s - t)^2
  const double al = 0.5 * curvature;
  return {al, slope - 2.0 * al * t, value - slope * t + al * t * t};
}

inline double eval_piece(const PiecewiseQuadratic1D::Piece& p, double t) {
  return (p.alpha * t + p.beta) * t + p.gamma;
}

/// Bisection for a monotone function on [lo, hi] to absolute tolerance 1e-13.
template <typename F>
double bisect(F&& g, double lo, double hi, double target, int max_iter = 200) {
  double glo = g(lo) - target;
  for (int it = 0; it < max_iter && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid) - target;
    if ((gm > 0) == (glo > 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

struct Patch {
  std::vector<double> breaks;
  std::vector<PiecewiseQuadratic1D::Piece> pieces;
  std::vector<Region> regions;

  void add(double right, PiecewiseQuadratic1D::Piece p, Region r) {
    if (right <= breaks.back() + 1e-14) return;
    breaks.push_back(right);
    pieces.push_back(p);
    regions.push_back(r);
  }
};

// Classical one-sided solution (upper constraint ignored) on [l, r].
inline Patch classical(double f, double l, double r, double b0, double b1) {
  Patch p{{l}, {}, {}};
  // Unconstrained: u'' = f through both endpoints.
  const double al = 0.5 * f;
  const double beta = (b1 - b0) / (r - l) - al * (r + l);
  const PiecewiseQuadratic1D::Piece full{al, beta, b0 - al * l * l - beta * l};
  const double vertex = -beta / (2.0 * al);
  const bool dips = vertex > l && vertex < r && eval_piece(full, vertex) < 0.0;
  if (!dips) {
    p.add(r, full, Region::open);
    return p;
  }
  const double z1 = l + std::sqrt(2.0 * b0 / f);
  const double z2 = r - std::sqrt(2.0 * b1 / f);
  p.add(z1, arc_from_vertex(f, z1, 0.0), Region::open);
  p.add(z2, {0.0, 0.0, 0.0}, Region::zero);
  p.add(r, arc_from_vertex(f, z2, 0.0), Region::open);
  return p;
}

inline Exact1D finish(Patch p, double tol = 1e-9) {
  Exact1D out;
  for (std::size_t k = 1; k < p.regions.size(); ++k) {
    const Region a = p.regions[k - 1], b = p.regions[k];
    if ((a == Region::zero) != (b == Region::zero)) out.gamma.push_back(p.breaks[k]);
    if ((a == Region::contact) != (b == Region::contact)) out.gamma_psi.push_back(p.breaks[k]);
  }
  out.u = PiecewiseQuadratic1D(std::move(p.breaks), std::move(p.pieces), tol);
  out.regions = std::move(p.regions);
  return out;
}

}  // namespace detail

/// Exact solution of u'' = f on {0 < u < psi}, u in [0, psi], C^1 across free
/// boundaries, with Dirichlet data (b0, b1) on [l, r]. Supports constant f with
/// 0 < f <= a and psi a model obstacle or a constant level.
inline Exact1D solve_1d_exact(double f, const Obstacle1D& psi, double l, double r, double b0, double b1) {
  using detail::Patch;
  require(f > 0.0 && r > l, ErrorKind::validation, "solve_1d_exact: need f > 0 and l < r");
  const double slack = 1e-12 * (1.0 + std::abs(psi(l)) + std::abs(psi(r)));
  require(b0 >= 0.0 && b1 >= 0.0 && b0 <= psi(l) + slack && b1 <= psi(r) + slack, ErrorKind::validation,
          "solve_1d_exact: boundary data must satisfy 0 <= bc <= psi");

  if (psi.kind == Obstacle1D::Kind::constant) {
    Patch p = detail::classical(f, l, r, b0, b1);
    // A convex profile never exceeds its endpoint values.
    return detail::finish(std::move(p));
  }

  require(f <= psi.a * (1.0 + 1e-12), ErrorKind::validation, "solve_1d_exact: requires f <= a");
  if (psi.side < 0) {
    // Reflect t -> -t, solve, reflect back.
    const Obstacle1D mirrored = Obstacle1D::model(psi.a, -psi.t0, +1);
    const Exact1D m = solve_1d_exact(f, mirrored, -r, -l, b1, b0);
    Patch p{{l}, {}, {}};
    const auto& br = m.u.breaks();
    const auto& pc = m.u.pieces();
    for (std::size_t k = pc.size(); k-- > 0;) {
      p.breaks.push_back(-br[k]);
      p.pieces.push_back({pc[k].alpha, -pc[k].beta, pc[k].gamma});
      p.regions.push_back(m.regions[k]);
    }
    p.breaks.front() = l;
    return detail::finish(std::move(p));
  }

  const double a = psi.a;
  const double t0 = psi.t0;
  const auto psi_piece = detail::arc_from_vertex(a, t0, 0.0);
  const auto dpsi = [&](double t) { return a * std::max(0.0, t - t0); };

  if (r <= t0) {
    Patch p{{l}, {}, {}};
    p.add(r, {0.0, 0.0, 0.0}, Region::zero);
    return detail::finish(std::move(p));
  }

  // Value at r of the arc leaving psi tangentially at c.
  const auto right_value = [&](double c) {
    return psi(c) + dpsi(c) * (r - c) + 0.5 * f * (r - c) * (r - c);
  };
  const bool degenerate = std::abs(a - f) <= 1e-12 * a;

  if (l < t0) {
    // psi vanishes on [l, t0], which pins u = u' = 0 at t0.
    require(b0 <= slack, ErrorKind::validation, "solve_1d_exact: bc must vanish where psi does");
    Patch p{{l}, {}, {}};
    const double free_arc = 0.5 * f * (r - t0) * (r - t0);
    const bool touches_psi = std::abs(b1 - psi(r)) <= 1e-10 * (1.0 + psi(r));
    if (b1 <= free_arc && !(degenerate && touches_psi)) {
      const double z = r - std::sqrt(2.0 * b1 / f);
      p.add(z, {0.0, 0.0, 0.0}, Region::zero);
      p.add(r, detail::arc_from_vertex(f, z, 0.0), Region::open);
      return detail::finish(std::move(p));
    }
    p.add(t0, {0.0, 0.0, 0.0}, Region::zero);
    if (degenerate) {
      if (!touches_psi)
        fail(ErrorKind::numerical, "solve_1d_exact: f = a admits no patch for this boundary value");
      p.add(r, psi_piece, Region::contact);
      return detail::finish(std::move(p));
    }
    const double c2 = detail::bisect(right_value, t0, r, b1);
    p.add(c2, psi_piece, Region::contact);
    p.add(r, detail::tangent_arc(f, c2, psi(c2), dpsi(c2)), Region::open);
    return detail::finish(std::move(p));
  }

  // psi > 0 on (l, r]: the classical profile unless it crosses psi.
  {
    Patch p = detail::classical(f, l, r, b0, b1);
    const Exact1D candidate = detail::finish(p);
    bool admissible = true;
    for (int k = 0; k <= 4000 && admissible; ++k) {
      const double t = l + (r - l) * k / 4000.0;
      if (candidate.u(t) > psi(t) + 1e-12) admissible = false;
    }
    if (admissible) return candidate;
  }
  if (degenerate) fail(ErrorKind::numerical, "solve_1d_exact: no admissible patch with f = a");
  // Contact [c1, c2] with tangent arcs on both sides.
  const auto left_value = [&](double c) {
    return psi(c) + dpsi(c) * (l - c) + 0.5 * f * (l - c) * (l - c);
  };
  const double c1 = detail::bisect(left_value, l, r, b0);
  const double c2 = detail::bisect(right_value, l, r, b1);
  if (c1 > c2 + 1e-12) fail(ErrorKind::numerical, "solve_1d_exact: contact interval is empty");
  const auto left_arc = detail::tangent_arc(f, c1, psi(c1), dpsi(c1));
  const double vertex = c1 - dpsi(c1) / f;
  if (vertex > l && detail::eval_piece(left_arc, vertex) < -1e-12)
    fail(ErrorKind::numerical, "solve_1d_exact: left arc leaves the admissible set");
  Patch p{{l}, {}, {}};
  p.add(c1, left_arc, Region::open);
  p.add(c2, psi_piece, Region::contact);
  p.add(r, detail::tangent_arc(f, c2, psi(c2), dpsi(c2)), Region::open);
  return detail::finish(std::move(p));
}

}  // namespace fbl
