#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <utility>
#include <vector>

#include "core.hpp"
#include "quadrature.hpp"

namespace scaffold {

/// The periodicity cell Y = [-1/2, 1/2]^3.
struct UnitCell {
  static constexpr double lower = -0.5;
  static constexpr double upper = 0.5;
  /// Minimum distance every surface point keeps from the cell boundary.
  static constexpr double margin = 1e-3;

  static bool contains(const Vec3& x, double margin_ = margin) {
    for (int d = 0; d < 3; ++d)
      if (!(x[d] > lower + margin_ && x[d] < upper - margin_)) return false;
    return true;
  }
};

/// Parametrization s_i : [0,1]^2 -> Y of one patch. The orientation flag
/// multiplies the normal computed from d_u s x d_v s.
struct PatchMap {
  std::function<Vec3(double, double)> eval;
  std::function<std::array<Vec3, 2>(double, double)> derivatives;
  int orientation = 1;
};

enum class PrimitiveKind { sphere, cube, rotated_cube, two_body, drilled_cube_stub };

struct PrimitiveParams {
  Vec3 center = Vec3::Zero();
  double radius = 0.3;
  double half_width = 0.15;
  Mat3 rotation = Mat3::Identity();
  /// second body of two_body: a cube with this center and half width
  Vec3 cube_center = Vec3(0.25, 0.25, 0.25);
  double cube_half_width = 0.075;
};

/// Orthogonal matrix used for the rotated targets and the rotated cube.
inline Mat3 reference_rotation() {
  const double s3 = 1.0 / std::sqrt(3.0), s2 = 1.0 / std::sqrt(2.0),
               s6 = 1.0 / std::sqrt(6.0);
  Mat3 t;
  t << s3, 0.0, 2.0 * s6,  //
      s3, -s2, -s6,        //
      s3, s2, -s6;
  return t;
}

namespace detail {

// Face k of [-1,1]^3 as q(u,v) = origin + u*du + v*dv with outward du x dv.
struct CubeFace {
  Vec3 origin, du, dv;
};

inline std::array<CubeFace, 6> cube_faces() {
  return {{
      {Vec3(-1, -1, 1), Vec3(2, 0, 0), Vec3(0, 2, 0)},   // +z
      {Vec3(-1, -1, -1), Vec3(0, 2, 0), Vec3(2, 0, 0)},  // -z
      {Vec3(1, -1, -1), Vec3(0, 2, 0), Vec3(0, 0, 2)},   // +x
      {Vec3(-1, -1, -1), Vec3(0, 0, 2), Vec3(0, 2, 0)},  // -x
      {Vec3(-1, 1, -1), Vec3(0, 0, 2), Vec3(2, 0, 0)},   // +y
      {Vec3(-1, -1, -1), Vec3(2, 0, 0), Vec3(0, 0, 2)},  // -y
  }};
}

inline void append_cube(std::vector<PatchMap>& maps, const Vec3& c, double h, const Mat3& t) {
  for (const CubeFace& f : cube_faces()) {
    PatchMap m;
    m.eval = [f, c, h, t](double u, double v) -> Vec3 {
      return c + h * (t * (f.origin + u * f.du + v * f.dv));
    };
    m.derivatives = [f, h, t](double, double) -> std::array<Vec3, 2> {
      return {h * (t * f.du), h * (t * f.dv)};
    };
    maps.push_back(std::move(m));
  }
}

// Equiangular cube-to-sphere map: face coordinates go through tan before
// projection, which keeps the parametric speed nearly uniform.
inline double equiangular(double u) { return 0.5 + 0.5 * std::tan(0.25 * kPi * (2.0 * u - 1.0)); }
inline double equiangular_slope(double u) {
  const double c = std::cos(0.25 * kPi * (2.0 * u - 1.0));
  return 0.25 * kPi / (c * c);
}

inline void append_sphere(std::vector<PatchMap>& maps, const Vec3& c, double r) {
  for (const CubeFace& f : cube_faces()) {
    PatchMap m;
    m.eval = [f, c, r](double u, double v) -> Vec3 {
      const Vec3 q = f.origin + equiangular(u) * f.du + equiangular(v) * f.dv;
      return c + r * q / q.norm();
    };
    m.derivatives = [f, r](double u, double v) -> std::array<Vec3, 2> {
      const Vec3 q = f.origin + equiangular(u) * f.du + equiangular(v) * f.dv;
      const double nq = q.norm();
      const Vec3 qh = q / nq;
      auto d = [&](const Vec3& dq) -> Vec3 { return r * (dq - qh * qh.dot(dq)) / nq; };
      return {equiangular_slope(u) * d(f.du), equiangular_slope(v) * d(f.dv)};
    };
    maps.push_back(std::move(m));
  }
}

inline void require_inside(const Vec3& lo, const Vec3& hi, const char* what) {
  if (!UnitCell::contains(lo) || !UnitCell::contains(hi))
    fail(ErrorKind::geometry_out_of_cell,
         std::string(what) + " does not fit inside the unit cell with margin 1e-3");
}

}  // namespace detail

/// Patch maps of the supported initial shapes. Spheres are radial
/// projections of the six cube faces; cubes are six flat faces.
inline std::vector<PatchMap> generate_primitive(PrimitiveKind kind,
                                                const PrimitiveParams& params = {}) {
  std::vector<PatchMap> maps;
  const Vec3 one = Vec3::Ones();
  switch (kind) {
    case PrimitiveKind::sphere: {
      if (!(params.radius > 0.0)) fail(ErrorKind::parameter, "sphere radius must be positive");
      detail::require_inside(params.center - params.radius * one,
                             params.center + params.radius * one, "sphere");
      detail::append_sphere(maps, params.center, params.radius);
      break;
    }
    case PrimitiveKind::cube:
    case PrimitiveKind::rotated_cube: {
      if (!(params.half_width > 0.0)) fail(ErrorKind::parameter, "cube half width must be positive");
      const Mat3 t = kind == PrimitiveKind::cube ? Mat3::Identity() : params.rotation;
      if ((t.transpose() * t - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-12)
        fail(ErrorKind::parameter, "rotation matrix is not orthogonal to 1e-12");
      // the rotated cube's extent is the row-wise l1 norm times the half width
      const Vec3 ext = params.half_width * t.cwiseAbs().rowwise().sum();
      detail::require_inside(params.center - ext, params.center + ext, "cube");
      detail::append_cube(maps, params.center, params.half_width, t);
      break;
    }
    case PrimitiveKind::two_body: {
      detail::require_inside(params.center - params.radius * one,
                             params.center + params.radius * one, "sphere");
      detail::require_inside(params.cube_center - params.cube_half_width * one,
                             params.cube_center + params.cube_half_width * one, "cube");
      const double gap = (params.center - params.cube_center).cwiseAbs().maxCoeff() -
                         params.radius - params.cube_half_width;
      if (gap <= 0.0) fail(ErrorKind::parameter, "two_body components overlap");
      detail::append_sphere(maps, params.center, params.radius);
      detail::append_cube(maps, params.cube_center, params.cube_half_width, Mat3::Identity());
      break;
    }
    case PrimitiveKind::drilled_cube_stub:
      fail(ErrorKind::not_implemented, "the 48-patch drilled cube parametrization is not provided");
  }
  return maps;
}

/// The (2^j+1)^2 interpolation points of every patch at level j, with
/// points on shared patch edges identified through a global index.
struct ElementGrid {
  int level = 0;
  int patches = 0;
  std::vector<Vec3> stencil;       // patch-major, index (p, l2, l1)
  std::vector<int> global_id;      // stencil index -> unique point
  std::vector<Vec3> unique_points;
  std::vector<int> orientation;    // per patch, +1 or -1

  int points_per_side() const { return (1 << level) + 1; }
  int elements_per_side() const { return 1 << level; }
  int element_count() const { return patches << (2 * level); }
  int stencil_index(int patch, int l1, int l2) const {
    const int n = points_per_side();
    return (patch * n + l2) * n + l1;
  }
};

/// Merges points closer than `tol` (max norm) and makes duplicates bitwise
/// identical. Unique indices follow first occurrence.
inline void deduplicate(ElementGrid& grid, double tol = 1e-12) {
  const int n = static_cast<int>(grid.stencil.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (grid.stencil[a].x() != grid.stencil[b].x()) return grid.stencil[a].x() < grid.stencil[b].x();
    return a < b;
  });
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (int s = 0; s < n; ++s) {
    const Vec3& a = grid.stencil[order[s]];
    for (int t = s + 1; t < n && grid.stencil[order[t]].x() - a.x() <= tol; ++t) {
      if ((grid.stencil[order[t]] - a).cwiseAbs().maxCoeff() <= tol) {
        const int ra = find(order[s]), rb = find(order[t]);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }
  grid.global_id.assign(n, -1);
  grid.unique_points.clear();
  std::vector<int> id_of_root(n, -1);
  for (int i = 0; i < n; ++i) {
    const int r = find(i);
    if (id_of_root[r] < 0) {
      id_of_root[r] = static_cast<int>(grid.unique_points.size());
      grid.unique_points.push_back(grid.stencil[r]);
    }
    grid.global_id[i] = id_of_root[r];
    grid.stencil[i] = grid.unique_points[id_of_root[r]];
  }
}

/// Samples every patch map at the dyadic points 2^-j (l, l').
inline ElementGrid refine_to_level(const std::vector<PatchMap>& maps, int level) {
  if (level < 0 || level > 10) fail(ErrorKind::parameter, "level out of range");
  ElementGrid grid;
  grid.level = level;
  grid.patches = static_cast<int>(maps.size());
  const int n = grid.points_per_side();
  const double h = 1.0 / (n - 1);
  grid.stencil.resize(static_cast<size_t>(grid.patches) * n * n);
  for (int p = 0; p < grid.patches; ++p) {
    grid.orientation.push_back(maps[p].orientation >= 0 ? 1 : -1);
    for (int l2 = 0; l2 < n; ++l2)
      for (int l1 = 0; l1 < n; ++l1)
        grid.stencil[grid.stencil_index(p, l1, l2)] = maps[p].eval(l1 * h, l2 * h);
  }
  deduplicate(grid);
  return grid;
}

/// Position, tangents, unit normal and surface measure at one point.
struct SurfaceSample {
  Vec3 x;
  Vec3 du, dv;
  Vec3 n;
  double g = 0.0;
};

/// Position and tangents only (no normalization or checks).
struct PointFrame {
  Vec3 x, du, dv;
};

namespace detail {

// In-place divided differences on integer nodes t_0 < ... < t_p.
template <typename Get, typename Set>
void newton_coefficients(int p, const int* nodes, Get get, Set set) {
  std::array<double, 17> c{};
  for (int i = 0; i <= p; ++i) c[i] = get(i);
  for (int k = 1; k <= p; ++k)
    for (int i = p; i >= k; --i) c[i] = (c[i] - c[i - 1]) / static_cast<double>(nodes[i] - nodes[i - k]);
  for (int i = 0; i <= p; ++i) set(i, c[i]);
}

}  // namespace detail

/// Piecewise tensor-product Lagrange reinterpolation of the patch maps on
/// the level-j grid. Each element stores its interpolant in Newton form on
/// the integer nodes m - k + l (element-local coordinates), evaluated by a
/// nested Horner scheme.
class PolynomialSurface {
 public:
  PolynomialSurface() = default;

  static PolynomialSurface reinterpolate(ElementGrid grid, std::array<int, 2> degree) {
    const int side = grid.elements_per_side();
    if (degree[0] < 1 || degree[1] < 1 || degree[0] > side || degree[1] > side || degree[0] > 16 ||
        degree[1] > 16)
      fail(ErrorKind::parameter, "interpolation degree must lie in [1, 2^j]");
    PolynomialSurface s;
    s.grid_ = std::move(grid);
    s.degree_ = degree;
    s.build();
    return s;
  }

  /// (4,4) capped at 2^j.
  static std::array<int, 2> default_degree(int level) {
    const int d = std::min(4, 1 << level);
    return {d, d};
  }

  const ElementGrid& grid() const { return grid_; }
  int level() const { return grid_.level; }
  int patches() const { return grid_.patches; }
  std::array<int, 2> degree() const { return degree_; }
  int element_count() const { return grid_.element_count(); }
  int elements_per_side() const { return grid_.elements_per_side(); }

  int patch_of(int e) const { return e >> (2 * grid_.level); }
  /// Element indices (k, k') within its patch.
  std::array<int, 2> element_index(int e) const {
    const int local = e & ((1 << (2 * grid_.level)) - 1);
    return {local & (elements_per_side() - 1), local >> grid_.level};
  }
  int orientation(int e) const { return grid_.orientation[patch_of(e)]; }

  /// Unique ids of the corners (0,0), (1,0), (0,1), (1,1) of element e.
  std::array<int, 4> corner_ids(int e) const {
    const auto [k1, k2] = element_index(e);
    const int p = patch_of(e);
    return {grid_.global_id[grid_.stencil_index(p, k1, k2)],
            grid_.global_id[grid_.stencil_index(p, k1 + 1, k2)],
            grid_.global_id[grid_.stencil_index(p, k1, k2 + 1)],
            grid_.global_id[grid_.stencil_index(p, k1 + 1, k2 + 1)]};
  }

  PointFrame evaluate(int e, double u, double v) const {
    const int n1 = degree_[0] + 1, n2 = degree_[1] + 1;
    const double* c = &coeffs_[static_cast<size_t>(e) * 3 * n1 * n2];
    const int* tu = &nodes_[static_cast<size_t>(e) * 2 * 17];
    const int* tv = tu + 17;
    PointFrame f;
    for (int dim = 0; dim < 3; ++dim) {
      const double* cd = c + dim * n1 * n2;
      // Horner in u for each v-coefficient, then Horner in v
      double pv = 0.0, dpv_u = 0.0, dpv_v = 0.0;
      for (int b = n2 - 1; b >= 0; --b) {
        double q = cd[b * n1 + n1 - 1], dq = 0.0;
        for (int a = n1 - 2; a >= 0; --a) {
          dq = q + (u - tu[a]) * dq;
          q = cd[b * n1 + a] + (u - tu[a]) * q;
        }
        if (b == n2 - 1) {
          pv = q;
          dpv_u = dq;
          dpv_v = 0.0;
        } else {
          dpv_v = pv + (v - tv[b]) * dpv_v;
          pv = q + (v - tv[b]) * pv;
          dpv_u = dq + (v - tv[b]) * dpv_u;
        }
      }
      f.x[dim] = pv;
      f.du[dim] = dpv_u;
      f.dv[dim] = dpv_v;
    }
    return f;
  }

  /// Full sample with oriented unit normal; throws on degenerate tangents.
  SurfaceSample sample(int e, double u, double v) const {
    const PointFrame f = evaluate(e, u, v);
    const Vec3 c = f.du.cross(f.dv);
    const double g = c.norm();
    if (!(g >= 1e-14))
      fail(ErrorKind::degenerate_element, "tangent cross product vanishes on element " + std::to_string(e));
    // scaling by the largest entry first keeps axis-aligned normals exact
    Vec3 n = c / c.cwiseAbs().maxCoeff();
    n *= orientation(e) / n.norm();
    return SurfaceSample{f.x, f.du, f.dv, n, g};
  }

  /// Margin and regularity checks at stencil points and a 3x3 sample grid.
  void validate() const {
    for (const Vec3& x : grid_.unique_points)
      if (!UnitCell::contains(x))
        fail(ErrorKind::geometry_out_of_cell, "surface point leaves the unit cell margin");
    for (int e = 0; e < element_count(); ++e)
      for (double u : {0.0, 0.5, 1.0})
        for (double v : {0.0, 0.5, 1.0}) {
          const SurfaceSample s = sample(e, u, v);
          if (!UnitCell::contains(s.x))
            fail(ErrorKind::geometry_out_of_cell, "surface point leaves the unit cell margin");
        }
  }

 private:
  void build() {
    const int side = elements_per_side();
    const int n = grid_.points_per_side();
    const int n1 = degree_[0] + 1, n2 = degree_[1] + 1;
    const int ne = element_count();
    coeffs_.assign(static_cast<size_t>(ne) * 3 * n1 * n2, 0.0);
    nodes_.assign(static_cast<size_t>(ne) * 2 * 17, 0);
    for (int e = 0; e < ne; ++e) {
      const int p = patch_of(e);
      const auto [k1, k2] = element_index(e);
      const int m1 = std::min(k1, side - degree_[0]);
      const int m2 = std::min(k2, side - degree_[1]);
      int* tu = &nodes_[static_cast<size_t>(e) * 34];
      int* tv = tu + 17;
      for (int l = 0; l < n1; ++l) tu[l] = m1 - k1 + l;
      for (int l = 0; l < n2; ++l) tv[l] = m2 - k2 + l;
      double* c = &coeffs_[static_cast<size_t>(e) * 3 * n1 * n2];
      for (int dim = 0; dim < 3; ++dim) {
        double* cd = c + dim * n1 * n2;
        for (int b = 0; b < n2; ++b)
          for (int a = 0; a < n1; ++a) cd[b * n1 + a] = grid_.stencil[(p * n + m2 + b) * n + m1 + a][dim];
        for (int b = 0; b < n2; ++b)
          detail::newton_coefficients(
              degree_[0], tu, [&](int i) { return cd[b * n1 + i]; },
              [&](int i, double val) { cd[b * n1 + i] = val; });
        for (int a = 0; a < n1; ++a)
          detail::newton_coefficients(
              degree_[1], tv, [&](int i) { return cd[i * n1 + a]; },
              [&](int i, double val) { cd[i * n1 + a] = val; });
      }
    }
    (void)n;
  }

  ElementGrid grid_;
  std::array<int, 2> degree_{1, 1};
  std::vector<double> coeffs_;
  std::vector<int> nodes_;
};

/// Convenience: maps -> grid -> reinterpolated surface with the default degree.
inline PolynomialSurface build_surface(const std::vector<PatchMap>& maps, int level,
                                       std::array<int, 2> degree = {0, 0}) {
  if (degree[0] == 0) degree = PolynomialSurface::default_degree(level);
  PolynomialSurface s = PolynomialSurface::reinterpolate(refine_to_level(maps, level), degree);
  s.validate();
  return s;
}

/// Gauss order that integrates <x, d_u s x d_v s> exactly on one element.
inline int volume_quadrature_order(const PolynomialSurface& s) {
  const int p = std::max(s.degree()[0], s.degree()[1]);
  return (3 * p + 2) / 2 + 1;
}

/// Connected components of the element adjacency (shared unique points).
inline std::vector<int> element_components(const PolynomialSurface& s) {
  const int ne = s.element_count();
  const int np = static_cast<int>(s.grid().unique_points.size());
  std::vector<int> parent(ne + np);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (int e = 0; e < ne; ++e)
    for (int id : s.corner_ids(e)) {
      const int ra = find(e), rb = find(ne + id);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
  std::vector<int> comp(ne), label(ne + np, -1);
  int next = 0;
  for (int e = 0; e < ne; ++e) {
    const int r = find(e);
    if (label[r] < 0) label[r] = next++;
    comp[e] = label[r];
  }
  return comp;
}

/// (1/3) of the flux of x through each closed component.
inline std::vector<double> component_volumes(const PolynomialSurface& s) {
  const std::vector<int> comp = element_components(s);
  const int ncomp = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
  std::vector<double> vol(ncomp, 0.0);
  const GaussRule& g = gauss_legendre(volume_quadrature_order(s));
  for (int e = 0; e < s.element_count(); ++e) {
    double acc = 0.0;
    for (int a = 0; a < g.size(); ++a)
      for (int b = 0; b < g.size(); ++b) {
        const PointFrame f = s.evaluate(e, g.points[a], g.points[b]);
        acc += g.weights[a] * g.weights[b] * f.x.dot(f.du.cross(f.dv));
      }
    vol[comp[e]] += s.orientation(e) * acc / 3.0;
  }
  return vol;
}

/// |Omega| by the divergence theorem.
inline double cavity_volume(const PolynomialSurface& s) {
  double total = 0.0;
  for (double v : component_volumes(s)) {
    if (!(v > 0.0)) fail(ErrorKind::orientation, "closed component with non-positive enclosed volume");
    total += v;
  }
  return total;
}

/// Total surface area.
inline double surface_area(const PolynomialSurface& s, int order = 8) {
  const GaussRule& g = gauss_legendre(order);
  double acc = 0.0;
  for (int e = 0; e < s.element_count(); ++e)
    for (int a = 0; a < g.size(); ++a)
      for (int b = 0; b < g.size(); ++b) {
        const PointFrame f = s.evaluate(e, g.points[a], g.points[b]);
        acc += g.weights[a] * g.weights[b] * f.du.cross(f.dv).norm();
      }
  return acc;
}

/// Moves every unique stencil point by the given displacement (one row per
/// unique point), scatters to all duplicates and reinterpolates. Violations of
/// the cell margin or degenerate elements are reported as step rejections.
inline PolynomialSurface displace(const PolynomialSurface& s, const Eigen::MatrixX3d& displacement) {
  ElementGrid grid = s.grid();
  if (displacement.rows() != static_cast<Eigen::Index>(grid.unique_points.size()))
    fail(ErrorKind::parameter, "displacement size does not match the unique point count");
  for (size_t i = 0; i < grid.unique_points.size(); ++i)
    for (int d = 0; d < 3; ++d) {
      const double dx = displacement(static_cast<Eigen::Index>(i), d);
      if (dx != 0.0) grid.unique_points[i][d] += dx;
    }
  for (size_t i = 0; i < grid.stencil.size(); ++i) grid.stencil[i] = grid.unique_points[grid.global_id[i]];
  PolynomialSurface out = PolynomialSurface::reinterpolate(std::move(grid), s.degree());
  try {
    out.validate();
  } catch (const Error& err) {
    fail(ErrorKind::step_rejected, err.what());
  }
  return out;
}

}  // namespace scaffold
