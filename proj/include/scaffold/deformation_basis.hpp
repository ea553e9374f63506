#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>

#include "core.hpp"
#include "surface_geometry.hpp"

namespace scaffold {

/// Matern correlation with smoothness 9/2, normalized to k(0) = 1.
inline double matern_9_2(double r, double ell) {
  if (!(ell > 0.0)) fail(ErrorKind::parameter, "correlation length must be positive");
  const double s = r / ell;
  const double s2 = s * s;
  return (1.0 + 3.0 * s + 27.0 / 7.0 * s2 + 18.0 / 7.0 * s2 * s + 27.0 / 35.0 * s2 * s2) * std::exp(-3.0 * s);
}

/// Implicit symmetric positive semidefinite matrix: size, diagonal entry and
/// one full column.
struct MatrixAccessor {
  int size = 0;
  std::function<double(int)> diagonal;
  std::function<void(int, double*)> column;
};

/// Vector-valued covariance of the displacement: C[(a,i),(b,j)] = delta_ij
/// k(|x_a - x_b|) with row index 3a + i.
inline MatrixAccessor matern_covariance(const std::vector<Vec3>& points, double ell) {
  if (points.empty()) fail(ErrorKind::parameter, "covariance needs at least one point");
  if (!(ell > 0.0)) fail(ErrorKind::parameter, "correlation length must be positive");
  MatrixAccessor c;
  c.size = 3 * static_cast<int>(points.size());
  c.diagonal = [](int) { return 1.0; };
  c.column = [pts = &points, ell](int col, double* out) {
    const int b = col / 3, j = col % 3;
    const Vec3& xb = (*pts)[b];
    for (size_t a = 0; a < pts->size(); ++a) {
      out[3 * a + 0] = 0.0;
      out[3 * a + 1] = 0.0;
      out[3 * a + 2] = 0.0;
      out[3 * a + j] = matern_9_2(((*pts)[a] - xb).norm(), ell);
    }
  };
  return c;
}

struct CovarianceFactor {
  /// size x rank, C ~ L L^T
  Eigen::MatrixXd L;
  std::vector<int> pivots;
  /// trace of C - L L^T
  double trace_residual = 0.0;
  double initial_trace = 0.0;
  /// final residual diagonal
  Eigen::VectorXd residual_diagonal;
};

/// Greedy diagonally pivoted Cholesky. Stops when the trace of the residual
/// drops to tol times the initial trace or the rank reaches max_rank. Ties in
/// the pivot choice go to the lowest index.
inline CovarianceFactor pivoted_cholesky(const MatrixAccessor& c, double tol, int max_rank) {
  if (!(tol > 0.0)) fail(ErrorKind::parameter, "pivoted Cholesky tolerance must be positive");
  const int n = c.size;
  max_rank = std::min(max_rank, n);
  CovarianceFactor f;
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d[i] = c.diagonal(i);
  f.initial_trace = d.sum();
  f.L.resize(n, std::max(max_rank, 1));
  Eigen::VectorXd col(n);
  int rank = 0;
  double trace = f.initial_trace;
  while (rank < max_rank && trace > tol * f.initial_trace) {
    int piv = 0;
    for (int i = 1; i < n; ++i)
      if (d[i] > d[piv]) piv = i;
    if (!(d[piv] > 0.0)) break;
    c.column(piv, col.data());
    if (rank > 0) col.noalias() -= f.L.leftCols(rank) * f.L.row(piv).head(rank).transpose();
    const double s = std::sqrt(d[piv]);
    f.L.col(rank) = col / s;
    d -= f.L.col(rank).cwiseAbs2();
    d[piv] = 0.0;
    f.pivots.push_back(piv);
    ++rank;
    if (d.minCoeff() < -1e-10) fail(ErrorKind::numerical_breakdown, "negative residual diagonal in pivoted Cholesky");
    trace = d.sum();
  }
  f.L.conservativeResize(n, rank);
  f.trace_residual = trace;
  f.residual_diagonal = d;
  return f;
}

/// Displacement modes v_k = L vt_k of the reduced eigenproblem L^T L vt = lambda vt,
/// so that |v_k|^2 = lambda_k. Each column of `fields` is one mode in the
/// 3a + i layout.
struct DeformationBasis {
  Eigen::MatrixXd fields;
  Eigen::VectorXd eigenvalues;
  CovarianceFactor factor;
  double correlation_length = 1.0;

  int size() const { return static_cast<int>(fields.cols()); }
  int point_count() const { return static_cast<int>(fields.rows() / 3); }

  /// Mode k as one row per point.
  Eigen::MatrixX3d field(int k) const {
    Eigen::MatrixX3d v(point_count(), 3);
    for (int a = 0; a < point_count(); ++a)
      for (int i = 0; i < 3; ++i) v(a, i) = fields(3 * a + i, k);
    return v;
  }

  /// sum_k y_k V_k as one row per point.
  Eigen::MatrixX3d displacement(const Eigen::VectorXd& y) const {
    if (y.size() != size()) fail(ErrorKind::parameter, "parameter vector length does not match the basis");
    const Eigen::VectorXd flat = fields * y;
    Eigen::MatrixX3d v(point_count(), 3);
    for (int a = 0; a < point_count(); ++a)
      for (int i = 0; i < 3; ++i) v(a, i) = flat[3 * a + i];
    return v;
  }
};

/// Top p modes, descending. The sign of every reduced eigenvector is fixed by
/// making its first nonzero entry positive; entries below 1e-6 of the largest
/// count as zero so that roundoff cannot flip the choice.
inline DeformationBasis extract_fields(const CovarianceFactor& f, int p) {
  const int rank = static_cast<int>(f.L.cols());
  if (p < 1 || p > rank) fail(ErrorKind::parameter, "requested more modes than the factor rank");
  const Eigen::MatrixXd g = f.L.transpose() * f.L;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  if (es.info() != Eigen::Success) fail(ErrorKind::numerical_breakdown, "reduced eigenproblem failed");
  DeformationBasis b;
  b.factor = f;
  b.eigenvalues.resize(p);
  b.fields.resize(f.L.rows(), p);
  for (int k = 0; k < p; ++k) {
    const int src = rank - 1 - k;  // eigenvalues come out ascending
    Eigen::VectorXd vt = es.eigenvectors().col(src);
    const double scale = vt.cwiseAbs().maxCoeff();
    for (int i = 0; i < rank; ++i)
      if (std::abs(vt[i]) > 1e-6 * scale) {
        if (vt[i] < 0.0) vt = -vt;
        break;
      }
    b.eigenvalues[k] = std::max(es.eigenvalues()[src], 0.0);
    b.fields.col(k) = f.L * vt;
  }
  return b;
}

/// Matern basis on the unique stencil points of a surface.
inline DeformationBasis build_deformation_basis(const PolynomialSurface& s, int p, double ell,
                                                double tol = 1e-6, int max_rank = 600) {
  const std::vector<Vec3>& pts = s.grid().unique_points;
  const MatrixAccessor c = matern_covariance(pts, ell);
  DeformationBasis b = extract_fields(pivoted_cholesky(c, tol, std::min(c.size, max_rank)), p);
  b.correlation_length = ell;
  return b;
}

/// Gamma(y) = Gamma_ref + sum_k y_k V_k, evaluated at the stencil points.
inline PolynomialSurface apply_displacement(const PolynomialSurface& s, const DeformationBasis& basis,
                                            const Eigen::VectorXd& y) {
  if (basis.point_count() != static_cast<int>(s.grid().unique_points.size()))
    fail(ErrorKind::parameter, "basis was built on a different surface");
  return displace(s, basis.displacement(y));
}

}  // namespace scaffold
