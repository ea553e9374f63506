#pragma once

#include <array>
#include <cmath>
#include <mutex>
#include <vector>

#include "core.hpp"

namespace scaffold {

/// Gauss-Legendre rule on [0,1].
struct GaussRule {
  std::vector<double> points;
  std::vector<double> weights;
  int size() const { return static_cast<int>(points.size()); }
};

namespace detail {

inline GaussRule compute_gauss_legendre(int n) {
  GaussRule rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton iteration on P_n starting from the Chebyshev-like guess
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.points[i] = 0.5 * (1.0 - x);
    rule.points[n - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[i] = 0.5 * w;
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

}  // namespace detail

inline constexpr int kMaxGaussOrder = 40;

/// Cached Gauss-Legendre rule with n points on [0,1], 1 <= n <= 40.
inline const GaussRule& gauss_legendre(int n) {
  if (n < 1 || n > kMaxGaussOrder)
    fail(ErrorKind::parameter, "Gauss order out of range: " + std::to_string(n));
  static std::array<GaussRule, kMaxGaussOrder + 1> cache;
  static std::array<std::once_flag, kMaxGaussOrder + 1> flags;
  std::call_once(flags[n], [n] { cache[n] = detail::compute_gauss_legendre(n); });
  return cache[n];
}

/// A point of a four-dimensional rule over a pair of unit squares.
struct PairPoint {
  double x1, x2, y1, y2, w;
};

/// Relation of two elements for singular quadrature. The canonical
/// configurations are: identical squares; squares sharing the edge
/// {x2 = 0} = {y2 = 0} with x1 = y1 along it; squares sharing the corner
/// (0,0).
enum class PairRelation { separated, coincident, edge, vertex };

namespace detail {

inline std::vector<PairPoint> coincident_rule(int q) {
  const GaussRule& g = gauss_legendre(q);
  std::vector<PairPoint> out;
  out.reserve(8 * q * q * q * q);
  for (int s1 = 0; s1 < 2; ++s1)
    for (int s2 = 0; s2 < 2; ++s2)
      for (int tri = 0; tri < 2; ++tri)
        for (int a = 0; a < q; ++a)
          for (int b = 0; b < q; ++b)
            for (int c = 0; c < q; ++c)
              for (int d = 0; d < q; ++d) {
                const double xi = g.points[a], eta = g.points[b];
                const double t1 = tri == 0 ? xi : xi * eta;
                const double t2 = tri == 0 ? xi * eta : xi;
                const double u1 = g.points[c], u2 = g.points[d];
                PairPoint p{};
                const double lo1 = (1.0 - t1) * u1, lo2 = (1.0 - t2) * u2;
                if (s1 == 0) {
                  p.x1 = lo1;
                  p.y1 = lo1 + t1;
                } else {
                  p.y1 = lo1;
                  p.x1 = lo1 + t1;
                }
                if (s2 == 0) {
                  p.x2 = lo2;
                  p.y2 = lo2 + t2;
                } else {
                  p.y2 = lo2;
                  p.x2 = lo2 + t2;
                }
                p.w = g.weights[a] * g.weights[b] * g.weights[c] * g.weights[d] * xi *
                      (1.0 - t1) * (1.0 - t2);
                out.push_back(p);
              }
  return out;
}

inline std::vector<PairPoint> edge_rule(int q) {
  const GaussRule& g = gauss_legendre(q);
  std::vector<PairPoint> out;
  out.reserve(6 * q * q * q * q);
  for (int s1 = 0; s1 < 2; ++s1)
    for (int pyr = 0; pyr < 3; ++pyr)
      for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b)
          for (int c = 0; c < q; ++c)
            for (int d = 0; d < q; ++d) {
              const double xi = g.points[a];
              std::array<double, 3> t{};
              const double e1 = xi * g.points[b], e2 = xi * g.points[c];
              t[pyr] = xi;
              t[(pyr + 1) % 3] = e1;
              t[(pyr + 2) % 3] = e2;
              const double u = g.points[d];
              PairPoint p{};
              const double lo = (1.0 - t[0]) * u;
              if (s1 == 0) {
                p.x1 = lo;
                p.y1 = lo + t[0];
              } else {
                p.y1 = lo;
                p.x1 = lo + t[0];
              }
              p.x2 = t[1];
              p.y2 = t[2];
              p.w = g.weights[a] * g.weights[b] * g.weights[c] * g.weights[d] * xi * xi *
                    (1.0 - t[0]);
              out.push_back(p);
            }
  return out;
}

inline std::vector<PairPoint> vertex_rule(int q) {
  const GaussRule& g = gauss_legendre(q);
  std::vector<PairPoint> out;
  out.reserve(4 * q * q * q * q);
  for (int pyr = 0; pyr < 4; ++pyr)
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b)
        for (int c = 0; c < q; ++c)
          for (int d = 0; d < q; ++d) {
            const double xi = g.points[a];
            std::array<double, 4> t{};
            t[pyr] = xi;
            t[(pyr + 1) % 4] = xi * g.points[b];
            t[(pyr + 2) % 4] = xi * g.points[c];
            t[(pyr + 3) % 4] = xi * g.points[d];
            out.push_back(PairPoint{t[0], t[1], t[2], t[3],
                                    g.weights[a] * g.weights[b] * g.weights[c] *
                                        g.weights[d] * xi * xi * xi});
          }
  return out;
}

}  // namespace detail

/// Regularizing (Duffy-type) rules for the three touching configurations.
/// Each is exact for polynomials on [0,1]^4 up to the Gauss degree and
/// removes the 1/r singularity through the Jacobian of the collapsed
/// coordinates.
inline const std::vector<PairPoint>& singular_pair_rule(PairRelation rel, int q) {
  if (rel == PairRelation::separated)
    fail(ErrorKind::parameter, "no singular rule for separated pairs");
  if (q < 1 || q > 16) fail(ErrorKind::parameter, "singular rule order out of range");
  static std::array<std::array<std::vector<PairPoint>, 17>, 3> cache;
  static std::array<std::array<std::once_flag, 17>, 3> flags;
  const int idx = static_cast<int>(rel) - 1;
  std::call_once(flags[idx][q], [&] {
    switch (rel) {
      case PairRelation::coincident: cache[idx][q] = detail::coincident_rule(q); break;
      case PairRelation::edge: cache[idx][q] = detail::edge_rule(q); break;
      default: cache[idx][q] = detail::vertex_rule(q); break;
    }
  });
  return cache[idx][q];
}

}  // namespace scaffold
