#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbl/analysis.hpp"
#include "fbl/error.hpp"
#include "fbl/freeboundary.hpp"
#include "fbl/grid.hpp"
#include "fbl/solver.hpp"

namespace fbl::io {

using json = nlohmann::ordered_json;

// Every CSV starts with "# schema=<name>/<version>", then any key=value
// metadata on the same line, then a column header.
inline constexpr int kSchemaVersion = 1;

/// Shortest text that reads back to the same double.
inline std::string num(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorKind::io, "cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorKind::io, "write failed for '" + path.string() + "'");
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Fields

inline std::string grid_meta(const Grid& g) {
  return "nx=" + std::to_string(g.nx()) + " ny=" + std::to_string(g.ny()) + " x0=" + num(g.origin()[0]) +
         " y0=" + num(g.origin()[1]) + " h=" + num(g.h());
}

/// Row-major nodal values, x fastest.
inline std::string field_csv(const ScalarField& u, const std::string& column = "u") {
  const Grid& g = u.grid();
  require(g.dim() == 2, ErrorKind::validation, "field export is implemented for n = 2");
  std::string out = "# schema=fbl.field/" + std::to_string(kSchemaVersion) + " " + grid_meta(g) + "\n";
  out += "x,y," + column + "\n";
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const Point x = g.node(i, j);
      out += num(x[0]) + "," + num(x[1]) + "," + num(u.at(i, j)) + "\n";
    }
  return out;
}

inline std::string mask_csv(const PartitionMask& m) {
  const Grid& g = m.grid;
  std::string out = "# schema=fbl.mask/" + std::to_string(kSchemaVersion) + " " + grid_meta(g) + " eps=" + num(m.eps) + "\n";
  out += "x,y,label\n";
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const Point x = g.node(i, j);
      out += num(x[0]) + "," + num(x[1]) + "," + to_string(m.at(i, j)) + "\n";
    }
  return out;
}

namespace detail {

inline std::string meta_value(const std::string& line, const std::string& key, const std::string& source) {
  const std::string tag = " " + key + "=";
  const auto at = line.find(tag);
  if (at == std::string::npos) fail(ErrorKind::io, "'" + source + "': header lacks " + key);
  const auto start = at + tag.size();
  return line.substr(start, line.find(' ', start) - start);
}

inline double parse_double(const std::string& s, const std::string& source) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') fail(ErrorKind::io, "'" + source + "': malformed number '" + s + "'");
  return v;
}

}  // namespace detail

/// Reads a file written by field_csv. Node coordinates are checked against the header grid.
inline ScalarField read_field_csv(const std::filesystem::path& path) {
  const std::string src = path.string();
  std::istringstream in(read_text(path));
  std::string header, columns, line;
  std::getline(in, header);
  const std::string want = "# schema=fbl.field/" + std::to_string(kSchemaVersion);
  if (header.rfind(want, 0) != 0) fail(ErrorKind::io, "'" + src + "': not a field file (expected '" + want + "')");
  const int nx = static_cast<int>(detail::parse_double(detail::meta_value(header, "nx", src), src));
  const int ny = static_cast<int>(detail::parse_double(detail::meta_value(header, "ny", src), src));
  const double x0 = detail::parse_double(detail::meta_value(header, "x0", src), src);
  const double y0 = detail::parse_double(detail::meta_value(header, "y0", src), src);
  const double h = detail::parse_double(detail::meta_value(header, "h", src), src);
  if (nx < 2 || ny < 2 || !(h > 0)) fail(ErrorKind::io, "'" + src + "': invalid grid in header");
  const Grid g(2, {x0, y0}, h, {nx, ny});
  std::getline(in, columns);
  std::vector<double> values;
  values.reserve(g.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(','), c2 = line.rfind(',');
    if (c1 == std::string::npos || c1 == c2) fail(ErrorKind::io, "'" + src + "': malformed row '" + line + "'");
    if (values.size() >= g.size()) fail(ErrorKind::io, "'" + src + "': more rows than the header grid");
    const Point x{detail::parse_double(line.substr(0, c1), src), detail::parse_double(line.substr(c1 + 1, c2 - c1 - 1), src)};
    if (norm(x - g.node(values.size())) > 1e-9 * (1.0 + norm(x)))
      fail(ErrorKind::io, "'" + src + "': row " + std::to_string(values.size()) + " does not match the grid");
    values.push_back(detail::parse_double(line.substr(c2 + 1), src));
  }
  if (values.size() != g.size())
    fail(ErrorKind::io, "'" + src + "': expected " + std::to_string(g.size()) + " rows, found " + std::to_string(values.size()));
  return ScalarField(g, std::move(values));
}

// ---------------------------------------------------------------------------
// Series and curves

inline std::string series_csv(const FunctionalSeries& s) {
  std::string out = "# schema=fbl.series/" + std::to_string(kSchemaVersion) + " kind=" + to_string(s.kind) +
                    " monotone_violation=" + num(s.monotone_violation) + "\n";
  out += "r,value,violation\n";
  for (std::size_t q = 0; q < s.radii.size(); ++q) {
    // violation of this step against the previous radius
    const double v = q == 0 ? 0.0 : std::max(0.0, s.values[q - 1] - s.values[q]);
    const bool tracked = s.kind == SeriesKind::weiss || s.kind == SeriesKind::acf;
    out += num(s.radii[q]) + "," + num(s.values[q]) + "," + (tracked ? num(v) : std::string("")) + "\n";
  }
  return out;
}

inline std::string curves_csv(const std::vector<FreeBoundaryCurve>& curves, BoundaryKind which) {
  std::string out = "# schema=fbl.curves/" + std::to_string(kSchemaVersion) + " which=" + to_string(which) +
                    " curves=" + std::to_string(curves.size()) + "\n";
  out += "curve,closed,x,y,nx,ny\n";
  for (std::size_t c = 0; c < curves.size(); ++c)
    for (std::size_t i = 0; i < curves[c].points.size(); ++i) {
      const Point& p = curves[c].points[i];
      const Point& n = curves[c].normals[i];
      out += std::to_string(c) + "," + (curves[c].closed ? "1" : "0") + "," + num(p[0]) + "," + num(p[1]) + "," +
             num(n[0]) + "," + num(n[1]) + "\n";
    }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const Point& p) { return json::array({p[0], p[1]}); }

inline json to_json(const FunctionalSeries& s) {
  return json{{"kind", to_string(s.kind)}, {"radii", s.radii}, {"values", s.values},
              {"monotone_violation", s.monotone_violation}};
}

inline json to_json(const SolveReport& r) {
  return json{{"iterations", r.iterations},
              {"final_update_norm", r.final_update_norm},
              {"residuals",
               {{"open", r.residuals.open},
                {"contact", r.residuals.contact},
                {"zero", r.residuals.zero},
                {"min_active", r.residuals.min_active}}},
              {"d2_sup", r.d2_sup},
              {"measure_fraction_gamma", r.measure_fraction_gamma}};
}

inline json to_json(const NondegeneracyReport& r) {
  json entries = json::array();
  for (const auto& e : r.entries) entries.push_back({{"center", to_json(e.center)}, {"r", e.r}, {"margin", e.margin}});
  return json{{"eps_nd", r.eps_nd}, {"min_margin", r.min_margin}, {"pass", r.pass}, {"entries", entries}};
}

inline json to_json(const DirectionalResult& d) {
  return json{{"directions", d.directions},
              {"min_derivative", d.min_derivative},
              {"where_derivative", to_json(d.where_derivative)},
              {"dir_derivative", to_json(d.dir_derivative)},
              {"min_combo", d.min_combo},
              {"where_combo", to_json(d.where_combo)},
              {"dir_combo", to_json(d.dir_combo)}};
}

inline json to_json(const BlowupStudy& b) {
  json scales = json::array();
  for (const auto& s : b.scales)
    scales.push_back({{"lambda", s.lambda}, {"k", s.fit.k}, {"e", to_json(s.fit.e)}, {"c1_distance", s.fit.distance}});
  return json{{"center", to_json(b.center)}, {"scales", scales}, {"verdict", to_string(b.verdict)}};
}

inline json to_json(const C1Diagnostic& d) {
  json entries = json::array();
  for (const auto& e : d.entries) entries.push_back({{"r", e.r}, {"oscillation", e.oscillation}, {"points", e.points}});
  return json{{"center", to_json(d.center)}, {"entries", entries}, {"decreasing", d.decreasing}};
}

inline json to_json(const GraphFit& f) {
  return json{{"center", to_json(f.center)}, {"e", to_json(f.e)},          {"r", f.r},
              {"lipschitz_constant", f.lipschitz_constant}, {"residual", f.residual}, {"points", f.points}};
}

inline json to_json(const ProximityEvent& e) {
  return json{{"gamma_point", to_json(e.gamma_point)}, {"gamma_psi_point", to_json(e.gamma_psi_point)},
              {"distance", e.distance}};
}

}  // namespace fbl::io
