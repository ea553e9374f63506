#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <vector>

#include "core.hpp"
#include "surface_geometry.hpp"

namespace scaffold {

inline constexpr int kMaxSplineDegree = 8;

/// Values and first derivatives (with respect to the element-local
/// coordinate u in [0,1]) of the d+1 B-splines of degree d that do not vanish
/// on element k of the open uniform knot vector with 2^j intervals. Entry a
/// belongs to the patch function k + a.
inline void bspline_local(int d, int level, int k, double u, double* val, double* der) {
  const int nel = 1 << level;
  const double h = 1.0 / nel;
  auto knot = [&](int i) { return std::clamp(static_cast<double>(i - d) * h, 0.0, 1.0); };
  const int span = k + d;
  const double t = (k + u) * h;
  std::array<double, kMaxSplineDegree + 2> left{}, right{};
  std::array<std::array<double, kMaxSplineDegree + 1>, kMaxSplineDegree + 1> ndu{};
  ndu[0][0] = 1.0;
  for (int j = 1; j <= d; ++j) {
    left[j] = t - knot(span + 1 - j);
    right[j] = knot(span + j) - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double tmp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    ndu[j][j] = saved;
  }
  for (int a = 0; a <= d; ++a) val[a] = ndu[a][d];
  if (der == nullptr) return;
  if (d == 0) {
    der[0] = 0.0;
    return;
  }
  // first derivative from the degree d-1 functions stored in column d-1
  for (int a = 0; a <= d; ++a) {
    double acc = 0.0;
    if (a >= 1) acc += ndu[a - 1][d - 1] / ndu[d][a - 1];
    if (a <= d - 1) acc -= ndu[a][d - 1] / ndu[d][a];
    der[a] = d * acc * h;
  }
}

enum class SpaceKind { dirichlet_continuous, neumann_patchwise };

/// B-spline trace space on a multipatch surface. Every element carries
/// (d+1)^2 local functions, ordered a + (d+1) b for the product of the u-spline
/// a and the v-spline b. Patchwise functions are numbered p n^2 + i2 n + i1 with
/// n = 2^j + d; the continuous space merges patchwise functions along matching
/// patch edges, so each patchwise function maps to exactly one global DOF.
class TraceSpace {
 public:
  SpaceKind kind() const { return kind_; }
  int degree() const { return degree_; }
  int level() const { return level_; }
  int patches() const { return patches_; }
  int functions_per_side() const { return (1 << level_) + degree_; }
  int patchwise_count() const { return patches_ * functions_per_side() * functions_per_side(); }
  int dof_count() const { return dofs_; }
  int local_count() const { return (degree_ + 1) * (degree_ + 1); }

  /// Global DOF of a patchwise function.
  int dof_of(int patchwise) const { return map_[patchwise]; }
  const std::vector<int>& dof_map() const { return map_; }

  /// Patchwise index of local function l on element e.
  int patchwise_index(const PolynomialSurface& s, int e, int l) const {
    const int n = functions_per_side();
    const auto [k1, k2] = s.element_index(e);
    const int a = l % (degree_ + 1), b = l / (degree_ + 1);
    return (s.patch_of(e) * n + k2 + b) * n + k1 + a;
  }
  int global_index(const PolynomialSurface& s, int e, int l) const {
    return map_[patchwise_index(s, e, l)];
  }

  /// Values of the local functions at (u,v) on an element at in-patch index
  /// (k1,k2); derivatives optional.
  void evaluate(int k1, int k2, double u, double v, double* val, double* du = nullptr,
                double* dv = nullptr) const {
    std::array<double, kMaxSplineDegree + 1> bu{}, bv{}, du1{}, dv1{};
    const bool ders = du != nullptr || dv != nullptr;
    bspline_local(degree_, level_, k1, u, bu.data(), ders ? du1.data() : nullptr);
    bspline_local(degree_, level_, k2, v, bv.data(), ders ? dv1.data() : nullptr);
    const int m = degree_ + 1;
    for (int b = 0; b < m; ++b)
      for (int a = 0; a < m; ++a) {
        val[a + m * b] = bu[a] * bv[b];
        if (du) du[a + m * b] = du1[a] * bv[b];
        if (dv) dv[a + m * b] = bu[a] * dv1[b];
      }
  }

  static TraceSpace build(const PolynomialSurface& s, SpaceKind kind, int degree) {
    if (degree < 0 || degree > kMaxSplineDegree)
      fail(ErrorKind::parameter, "B-spline degree out of range");
    if (kind == SpaceKind::dirichlet_continuous && degree < 1)
      fail(ErrorKind::parameter, "continuous trace space needs degree >= 1");
    TraceSpace sp;
    sp.kind_ = kind;
    sp.degree_ = degree;
    sp.level_ = s.level();
    sp.patches_ = s.patches();
    const int total = sp.patchwise_count();
    sp.map_.resize(total);
    std::iota(sp.map_.begin(), sp.map_.end(), 0);
    if (kind == SpaceKind::dirichlet_continuous) sp.glue(s);
    sp.dofs_ = kind == SpaceKind::neumann_patchwise ? total : sp.dofs_;
    return sp;
  }

 private:
  // Unique-id sequence of side `side` (0: v=0, 1: u=1, 2: v=1, 3: u=0) of a
  // patch, running in the direction of increasing u resp. v.
  static std::vector<int> side_ids(const PolynomialSurface& s, int p, int side) {
    const ElementGrid& g = s.grid();
    const int n = g.points_per_side();
    std::vector<int> ids(n);
    for (int l = 0; l < n; ++l) {
      int l1 = 0, l2 = 0;
      switch (side) {
        case 0: l1 = l; l2 = 0; break;
        case 1: l1 = n - 1; l2 = l; break;
        case 2: l1 = l; l2 = n - 1; break;
        default: l1 = 0; l2 = l; break;
      }
      ids[l] = g.global_id[g.stencil_index(p, l1, l2)];
    }
    return ids;
  }

  int side_function(int p, int side, int i) const {
    const int n = functions_per_side();
    int i1 = 0, i2 = 0;
    switch (side) {
      case 0: i1 = i; i2 = 0; break;
      case 1: i1 = n - 1; i2 = i; break;
      case 2: i1 = i; i2 = n - 1; break;
      default: i1 = 0; i2 = i; break;
    }
    return (p * n + i2) * n + i1;
  }

  void glue(const PolynomialSurface& s) {
    const int total = patchwise_count();
    std::vector<int> parent(total);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int a) {
      while (parent[a] != a) a = parent[a] = parent[parent[a]];
      return a;
    };
    auto unite = [&](int a, int b) {
      const int ra = find(a), rb = find(b);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    };
    struct Side {
      int patch, side;
      bool reversed;
    };
    std::map<std::vector<int>, std::vector<Side>> by_key;
    for (int p = 0; p < patches_; ++p)
      for (int side = 0; side < 4; ++side) {
        std::vector<int> ids = side_ids(s, p, side);
        std::vector<int> rev(ids.rbegin(), ids.rend());
        const bool reversed = rev < ids;
        by_key[reversed ? rev : ids].push_back(Side{p, side, reversed});
      }
    const int n = functions_per_side();
    for (const auto& [key, sides] : by_key) {
      if (sides.size() != 2)
        fail(ErrorKind::topology, "patch edge shared by " + std::to_string(sides.size()) +
                                      " patch sides (expected 2)");
      const Side& a = sides[0];
      const Side& b = sides[1];
      const bool flip = a.reversed != b.reversed;
      for (int i = 0; i < n; ++i)
        unite(side_function(a.patch, a.side, i), side_function(b.patch, b.side, flip ? n - 1 - i : i));
    }
    std::vector<int> label(total, -1);
    int next = 0;
    for (int i = 0; i < total; ++i) {
      const int r = find(i);
      if (label[r] < 0) label[r] = next++;
      map_[i] = label[r];
    }
    dofs_ = next;
  }

  SpaceKind kind_ = SpaceKind::neumann_patchwise;
  int degree_ = 0;
  int level_ = 0;
  int patches_ = 0;
  int dofs_ = 0;
  std::vector<int> map_;
};

/// Builds the continuous (Dirichlet) and patchwise (Neumann) spaces.
inline std::pair<TraceSpace, TraceSpace> build_spaces(const PolynomialSurface& s, int degree) {
  return {TraceSpace::build(s, SpaceKind::dirichlet_continuous, degree),
          TraceSpace::build(s, SpaceKind::neumann_patchwise, degree)};
}

}  // namespace scaffold
