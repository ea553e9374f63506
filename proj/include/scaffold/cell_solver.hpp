#pragma once

#include <Eigen/LU>

#include "bem_assembly.hpp"
#include "core.hpp"
#include "surface_geometry.hpp"
#include "trace_space.hpp"

namespace scaffold {

/// Traces of the three cell functions in the continuous space.
struct CellSolution {
  TraceSpace space;
  /// column i holds the coefficients of w_i
  Eigen::MatrixX3d w;
  /// Neumann data projected into the patchwise space, column i = M_N^-1 b_i
  Eigen::MatrixX3d neumann;
  double condition = 0.0;
  double residual = 0.0;
};

/// Discrete Neumann-to-Dirichlet map (1/2 M - K) w_i = S M_N^-1 b_i, where K
/// is the double layer with respect to the normal pointing out of the cavity.
/// The solution is shifted to zero surface mean afterwards.
inline CellSolution solve_n2d(const OperatorSet& ops) {
  const Eigen::LLT<Eigen::MatrixXd> mass(ops.M_N);
  if (mass.info() != Eigen::Success) fail(ErrorKind::solver, "Neumann mass matrix is not positive definite");
  CellSolution sol;
  sol.space = ops.dirichlet;
  sol.neumann = mass.solve(Eigen::MatrixXd(ops.b_N));
  const Eigen::MatrixXd rhs = ops.S * sol.neumann;
  const Eigen::MatrixXd a = 0.5 * ops.M_D - ops.K;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const double rc = lu.rcond();
  sol.condition = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
  if (!(sol.condition <= 1e12)) fail(ErrorKind::solver, "system matrix is numerically singular");
  Eigen::MatrixXd w = lu.solve(rhs);
  sol.residual = (a * w - rhs).norm() / rhs.norm();
  const Eigen::VectorXd ones_mass = ops.M_D * Eigen::VectorXd::Ones(ops.M_D.rows());
  const double area = ones_mass.sum();
  for (int i = 0; i < 3; ++i) w.col(i).array() -= ones_mass.dot(w.col(i)) / area;
  sol.w = w;
  return sol;
}

/// w_i at (u,v) on element e.
inline double trace_eval(const CellSolution& sol, const PolynomialSurface& s, int e, double u, double v,
                         int i) {
  const int nl = sol.space.local_count();
  std::array<double, (kMaxSplineDegree + 1) * (kMaxSplineDegree + 1)> val{};
  const auto [k1, k2] = s.element_index(e);
  sol.space.evaluate(k1, k2, u, v, val.data());
  double acc = 0.0;
  for (int l = 0; l < nl; ++l) acc += val[l] * sol.w(sol.space.global_index(s, e, l), i);
  return acc;
}

/// Surface gradient of a scalar with parameter derivatives (wu, wv) at a
/// point with tangents du, dv.
inline Vec3 surface_gradient(const Vec3& du, const Vec3& dv, double wu, double wv) {
  const double g11 = du.dot(du), g12 = du.dot(dv), g22 = dv.dot(dv);
  const double det = g11 * g22 - g12 * g12;
  if (!(det >= 1e-14)) fail(ErrorKind::degenerate_element, "degenerate first fundamental form");
  const double c1 = (g22 * wu - g12 * wv) / det;
  const double c2 = (g11 * wv - g12 * wu) / det;
  return c1 * du + c2 * dv;
}

/// Tangential gradient of w_i at (u,v) on element e.
inline Vec3 tangential_gradient(const CellSolution& sol, const PolynomialSurface& s, int e, double u,
                                double v, int i) {
  const int nl = sol.space.local_count();
  std::array<double, (kMaxSplineDegree + 1) * (kMaxSplineDegree + 1)> val{}, du{}, dv{};
  const auto [k1, k2] = s.element_index(e);
  sol.space.evaluate(k1, k2, u, v, val.data(), du.data(), dv.data());
  double wu = 0.0, wv = 0.0;
  for (int l = 0; l < nl; ++l) {
    const double c = sol.w(sol.space.global_index(s, e, l), i);
    wu += du[l] * c;
    wv += dv[l] * c;
  }
  const PointFrame f = s.evaluate(e, u, v);
  return surface_gradient(f.du, f.dv, wu, wv);
}

}  // namespace scaffold
