#pragma once

#include <vector>

#include "cell_solver.hpp"
#include "core.hpp"
#include "surface_geometry.hpp"

namespace scaffold {

/// Gauss order of the boundary integrals: B-spline degree + geometry degree + 1.
inline int boundary_quadrature_order(const PolynomialSurface& s, const CellSolution& sol) {
  return sol.space.degree() + std::max(s.degree()[0], s.degree()[1]) + 1;
}

/// a_ij = delta_ij |Y \ Omega| - int_Gamma w_i n_j.
inline Mat3 effective_tensor(const PolynomialSurface& s, const CellSolution& sol) {
  const double vol = cavity_volume(s);
  const int q = boundary_quadrature_order(s, sol);
  const GaussRule& g = gauss_legendre(q);
  Mat3 flux = Mat3::Zero();
  for (int e = 0; e < s.element_count(); ++e)
    for (int b = 0; b < q; ++b)
      for (int a = 0; a < q; ++a) {
        const SurfaceSample smp = s.sample(e, g.points[a], g.points[b]);
        const double w = g.weights[a] * g.weights[b] * smp.g;
        for (int i = 0; i < 3; ++i) {
          const double wi = trace_eval(sol, s, e, g.points[a], g.points[b], i);
          flux.row(i) += (w * wi) * smp.n.transpose();
        }
      }
  return (1.0 - vol) * Mat3::Identity() - flux;
}

/// J = 1/2 |A - B|_F^2.
inline double shape_functional(const Mat3& a, const Mat3& b) { return 0.5 * (a - b).squaredNorm(); }

/// Quadrature points of the boundary integrals with the per-point factor
///   D_ij = -(<e_i + grad w_i, e_j + grad w_j> - n_i n_j) * weight
/// so that a'_ij[V] = sum over points of D_ij <V, n>.
struct ShapeDensity {
  int order = 0;
  /// per element, q^2 points in the order a + q b
  std::vector<Vec3> normal;
  std::vector<Mat3> density;
};

inline ShapeDensity shape_density(const PolynomialSurface& s, const CellSolution& sol) {
  ShapeDensity sd;
  const int q = boundary_quadrature_order(s, sol);
  sd.order = q;
  const GaussRule& g = gauss_legendre(q);
  const int np = s.element_count() * q * q;
  sd.normal.resize(np);
  sd.density.resize(np);
  for (int e = 0; e < s.element_count(); ++e)
    for (int b = 0; b < q; ++b)
      for (int a = 0; a < q; ++a) {
        const int p = (e * q + b) * q + a;
        const SurfaceSample smp = s.sample(e, g.points[a], g.points[b]);
        Mat3 grad;
        for (int i = 0; i < 3; ++i) {
          grad.col(i) = tangential_gradient(sol, s, e, g.points[a], g.points[b], i);
          grad(i, i) += 1.0;
        }
        const Mat3 d = grad.transpose() * grad - smp.n * smp.n.transpose();
        sd.normal[p] = smp.n;
        sd.density[p] = -(g.weights[a] * g.weights[b] * smp.g) * d;
      }
  return sd;
}

/// Displacement field on the surface: one vector per unique stencil point,
/// extended by the surface's Lagrange interpolation.
inline PolynomialSurface field_interpolant(const PolynomialSurface& s, const Eigen::MatrixX3d& field) {
  ElementGrid grid = s.grid();
  if (field.rows() != static_cast<Eigen::Index>(grid.unique_points.size()))
    fail(ErrorKind::parameter, "field size does not match the unique point count");
  for (size_t i = 0; i < grid.unique_points.size(); ++i)
    grid.unique_points[i] = field.row(static_cast<Eigen::Index>(i)).transpose();
  for (size_t i = 0; i < grid.stencil.size(); ++i) grid.stencil[i] = grid.unique_points[grid.global_id[i]];
  return PolynomialSurface::reinterpolate(std::move(grid), s.degree());
}

/// <V, n> at the density points.
inline std::vector<double> normal_component(const PolynomialSurface& s, const ShapeDensity& sd,
                                            const Eigen::MatrixX3d& field) {
  const PolynomialSurface f = field_interpolant(s, field);
  const int q = sd.order;
  const GaussRule& g = gauss_legendre(q);
  std::vector<double> vn(sd.normal.size());
  for (int e = 0; e < s.element_count(); ++e)
    for (int b = 0; b < q; ++b)
      for (int a = 0; a < q; ++a) {
        const int p = (e * q + b) * q + a;
        vn[p] = f.evaluate(e, g.points[a], g.points[b]).x.dot(sd.normal[p]);
      }
  return vn;
}

/// a'_ij[V] for the field V given at the unique stencil points.
inline Mat3 shape_derivative_coefficient(const PolynomialSurface& s, const ShapeDensity& sd,
                                         const Eigen::MatrixX3d& field) {
  const std::vector<double> vn = normal_component(s, sd, field);
  Mat3 acc = Mat3::Zero();
  for (size_t p = 0; p < vn.size(); ++p) acc += vn[p] * sd.density[p];
  return acc;
}

inline Mat3 shape_derivative_coefficient(const PolynomialSurface& s, const CellSolution& sol,
                                         const Eigen::MatrixX3d& field) {
  return shape_derivative_coefficient(s, shape_density(s, sol), field);
}

/// g_k = sum_ij (a_ij - b_ij) a'_ij[V_k].
inline Eigen::VectorXd shape_gradient(const Mat3& a, const Mat3& b, const std::vector<Mat3>& derivatives) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(derivatives.size()));
  const Mat3 r = a - b;
  for (size_t k = 0; k < derivatives.size(); ++k) g[static_cast<Eigen::Index>(k)] = (r.array() * derivatives[k].array()).sum();
  return g;
}

}  // namespace scaffold
