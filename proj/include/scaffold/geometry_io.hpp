#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "surface_geometry.hpp"

namespace scaffold {

/// One patch of a geometry file: tensor Lagrange interpolant through an
/// equispaced (p1+1) x (p2+1) grid on [0,1]^2, points ordered u fastest.
struct LagrangePatch {
  std::array<int, 2> degree{1, 1};
  int orientation = 1;
  std::vector<Vec3> points;
};

namespace detail {

// Values and derivatives of the equispaced Lagrange basis of degree p at t;
// exactly the unit vector at the nodes.
inline void lagrange_basis(int p, double t, std::vector<double>& val, std::vector<double>& der) {
  val.assign(p + 1, 0.0);
  der.assign(p + 1, 0.0);
  for (int i = 0; i <= p; ++i) {
    const double ti = static_cast<double>(i) / p;
    double prod = 1.0, sum = 0.0;
    for (int k = 0; k <= p; ++k) {
      if (k == i) continue;
      const double tk = static_cast<double>(k) / p;
      prod *= (t - tk) / (ti - tk);
    }
    // derivative by the product rule
    for (int m = 0; m <= p; ++m) {
      if (m == i) continue;
      const double tm = static_cast<double>(m) / p;
      double term = 1.0 / (ti - tm);
      for (int k = 0; k <= p; ++k) {
        if (k == i || k == m) continue;
        const double tk = static_cast<double>(k) / p;
        term *= (t - tk) / (ti - tk);
      }
      sum += term;
    }
    val[i] = prod;
    der[i] = sum;
  }
  const double s = t * p;
  const double r = std::round(s);
  if (std::abs(s - r) < 1e-12 && r >= 0 && r <= p) {
    std::fill(val.begin(), val.end(), 0.0);
    val[static_cast<int>(r)] = 1.0;
  }
}

}  // namespace detail

inline PatchMap patch_map(const LagrangePatch& lp) {
  const int n1 = lp.degree[0] + 1, n2 = lp.degree[1] + 1;
  if (lp.degree[0] < 1 || lp.degree[1] < 1 || static_cast<int>(lp.points.size()) != n1 * n2)
    fail(ErrorKind::schema, "patch point count does not match its degree");
  PatchMap m;
  m.orientation = lp.orientation;
  m.eval = [lp, n1, n2](double u, double v) -> Vec3 {
    std::vector<double> bu, du, bv, dv;
    detail::lagrange_basis(n1 - 1, u, bu, du);
    detail::lagrange_basis(n2 - 1, v, bv, dv);
    Vec3 x = Vec3::Zero();
    for (int b = 0; b < n2; ++b)
      for (int a = 0; a < n1; ++a)
        if (bu[a] != 0.0 && bv[b] != 0.0) x += (bu[a] * bv[b]) * lp.points[b * n1 + a];
    return x;
  };
  m.derivatives = [lp, n1, n2](double u, double v) -> std::array<Vec3, 2> {
    std::vector<double> bu, du, bv, dv;
    detail::lagrange_basis(n1 - 1, u, bu, du);
    detail::lagrange_basis(n2 - 1, v, bv, dv);
    Vec3 xu = Vec3::Zero(), xv = Vec3::Zero();
    for (int b = 0; b < n2; ++b)
      for (int a = 0; a < n1; ++a) {
        xu += (du[a] * bv[b]) * lp.points[b * n1 + a];
        xv += (bu[a] * dv[b]) * lp.points[b * n1 + a];
      }
    return {xu, xv};
  };
  return m;
}

/// Patches sampled from maps on an equispaced grid of the given degree.
inline std::vector<LagrangePatch> sample_patches(const std::vector<PatchMap>& maps, int degree) {
  std::vector<LagrangePatch> out;
  for (const PatchMap& m : maps) {
    LagrangePatch lp;
    lp.degree = {degree, degree};
    lp.orientation = m.orientation;
    for (int b = 0; b <= degree; ++b)
      for (int a = 0; a <= degree; ++a)
        lp.points.push_back(m.eval(static_cast<double>(a) / degree, static_cast<double>(b) / degree));
    out.push_back(std::move(lp));
  }
  return out;
}

/// The stencil of a surface as degree (2^j, 2^j) patches; reading them back
/// at level j reproduces the stencil exactly.
inline std::vector<LagrangePatch> stencil_patches(const PolynomialSurface& s) {
  const ElementGrid& g = s.grid();
  const int n = g.points_per_side();
  std::vector<LagrangePatch> out;
  for (int p = 0; p < g.patches; ++p) {
    LagrangePatch lp;
    lp.degree = {n - 1, n - 1};
    lp.orientation = g.orientation[p];
    for (int l2 = 0; l2 < n; ++l2)
      for (int l1 = 0; l1 < n; ++l1) lp.points.push_back(g.stencil[g.stencil_index(p, l1, l2)]);
    out.push_back(std::move(lp));
  }
  return out;
}

inline constexpr int kGeometryVersion = 1;

inline nlohmann::json geometry_to_json(const std::vector<LagrangePatch>& patches) {
  nlohmann::json arr = nlohmann::json::array();
  for (const LagrangePatch& lp : patches) {
    nlohmann::json pts = nlohmann::json::array();
    for (const Vec3& x : lp.points) pts.push_back({x[0], x[1], x[2]});
    arr.push_back({{"degree", {lp.degree[0], lp.degree[1]}}, {"orientation", lp.orientation}, {"points", pts}});
  }
  return {{"format", "scaffold-geometry"}, {"version", kGeometryVersion}, {"patches", arr}};
}

inline std::vector<LagrangePatch> geometry_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "scaffold-geometry") fail(ErrorKind::schema, "not a geometry file");
    if (j.at("version").get<int>() != kGeometryVersion) fail(ErrorKind::schema, "unsupported geometry version");
    std::vector<LagrangePatch> out;
    for (const auto& jp : j.at("patches")) {
      LagrangePatch lp;
      const auto deg = jp.at("degree").get<std::vector<int>>();
      if (deg.size() != 2) fail(ErrorKind::schema, "patch degree must have two entries");
      lp.degree = {deg[0], deg[1]};
      lp.orientation = jp.value("orientation", 1);
      if (lp.orientation != 1 && lp.orientation != -1) fail(ErrorKind::schema, "orientation must be +1 or -1");
      for (const auto& pt : jp.at("points")) {
        const auto v = pt.get<std::vector<double>>();
        if (v.size() != 3) fail(ErrorKind::schema, "points must have three coordinates");
        lp.points.emplace_back(v[0], v[1], v[2]);
      }
      if (static_cast<int>(lp.points.size()) != (lp.degree[0] + 1) * (lp.degree[1] + 1) || lp.degree[0] < 1 ||
          lp.degree[1] < 1)
        fail(ErrorKind::schema, "patch point count does not match its degree");
      out.push_back(std::move(lp));
    }
    if (out.empty()) fail(ErrorKind::schema, "geometry without patches");
    return out;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::schema, std::string("geometry file: ") + e.what());
  }
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::schema, path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot open " + path + " for writing");
  out << text;
  if (!out) fail(ErrorKind::io, "write failed: " + path);
}

inline void write_geometry(const std::vector<LagrangePatch>& patches, const std::string& path) {
  write_text_file(path, geometry_to_json(patches).dump(1) + "\n");
}

inline std::vector<PatchMap> read_geometry(const std::string& path) {
  std::vector<PatchMap> maps;
  for (const LagrangePatch& lp : geometry_from_json(read_json_file(path))) maps.push_back(patch_map(lp));
  return maps;
}

/// %.12g
inline std::string fmt12(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

/// Point data attached to a VTK export, evaluated at element-local (u,v).
struct VtkScalar {
  std::string name;
  std::function<double(int, double, double)> eval;
};
struct VtkVector {
  std::string name;
  std::function<Vec3(int, double, double)> eval;
};

/// Legacy ASCII PolyData with a samples x samples grid per element and quad
/// cells between neighbouring samples.
inline std::string vtk_polydata(const PolynomialSurface& s, const std::vector<VtkScalar>& scalars = {},
                                const std::vector<VtkVector>& vectors = {}, int samples = 5) {
  if (samples < 2) fail(ErrorKind::parameter, "need at least two samples per direction");
  const int ne = s.element_count();
  const int per = samples * samples;
  const long npts = static_cast<long>(ne) * per;
  const long ncells = static_cast<long>(ne) * (samples - 1) * (samples - 1);
  std::string out;
  out += "# vtk DataFile Version 3.0\nscaffold surface\nASCII\nDATASET POLYDATA\n";
  out += "POINTS " + std::to_string(npts) + " double\n";
  auto param = [&](int i) { return static_cast<double>(i) / (samples - 1); };
  for (int e = 0; e < ne; ++e)
    for (int b = 0; b < samples; ++b)
      for (int a = 0; a < samples; ++a) {
        const Vec3 x = s.evaluate(e, param(a), param(b)).x;
        out += fmt12(x[0]) + " " + fmt12(x[1]) + " " + fmt12(x[2]) + "\n";
      }
  out += "POLYGONS " + std::to_string(ncells) + " " + std::to_string(5 * ncells) + "\n";
  for (int e = 0; e < ne; ++e)
    for (int b = 0; b + 1 < samples; ++b)
      for (int a = 0; a + 1 < samples; ++a) {
        const long base = static_cast<long>(e) * per;
        const long i00 = base + b * samples + a;
        const long i10 = i00 + 1, i01 = i00 + samples, i11 = i01 + 1;
        const bool flip = s.orientation(e) < 0;
        out += "4 " + std::to_string(i00) + " " + std::to_string(flip ? i01 : i10) + " " + std::to_string(i11) + " " +
               std::to_string(flip ? i10 : i01) + "\n";
      }
  if (!scalars.empty() || !vectors.empty()) {
    out += "POINT_DATA " + std::to_string(npts) + "\n";
    for (const VtkScalar& sc : scalars) {
      out += "SCALARS " + sc.name + " double 1\nLOOKUP_TABLE default\n";
      for (int e = 0; e < ne; ++e)
        for (int b = 0; b < samples; ++b)
          for (int a = 0; a < samples; ++a) out += fmt12(sc.eval(e, param(a), param(b))) + "\n";
    }
    for (const VtkVector& vc : vectors) {
      out += "VECTORS " + vc.name + " double\n";
      for (int e = 0; e < ne; ++e)
        for (int b = 0; b < samples; ++b)
          for (int a = 0; a < samples; ++a) {
            const Vec3 v = vc.eval(e, param(a), param(b));
            out += fmt12(v[0]) + " " + fmt12(v[1]) + " " + fmt12(v[2]) + "\n";
          }
    }
  }
  return out;
}

inline void export_vtk(const PolynomialSurface& s, const std::string& path, const std::vector<VtkScalar>& scalars = {},
                       const std::vector<VtkVector>& vectors = {}, int samples = 5) {
  write_text_file(path, vtk_polydata(s, scalars, vectors, samples));
}

}  // namespace scaffold
