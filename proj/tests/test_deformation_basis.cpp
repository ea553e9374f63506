#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <scaffold/deformation_basis.hpp>

#include "test_support.hpp"

using namespace scaffold;
using namespace scaffold::test;

namespace {

Eigen::MatrixXd dense(const MatrixAccessor& c) {
  Eigen::MatrixXd m(c.size, c.size);
  for (int j = 0; j < c.size; ++j) c.column(j, m.col(j).data());
  return m;
}

std::vector<Vec3> sphere_points(int level) { return sphere(0.3, level).grid().unique_points; }

}  // namespace

TEST(Matern, IsOneAtTheOrigin) { EXPECT_EQ(matern_9_2(0.0, 0.7), 1.0); }

TEST(Matern, DependsOnlyOnTheRatio) {
  for (double r : {0.01, 0.3, 1.0, 2.5})
    for (double a : {0.25, 3.0}) EXPECT_NEAR(matern_9_2(r, 1.0), matern_9_2(a * r, a), 1e-15);
}

TEST(Matern, ClosedFormAtUnitDistance) {
  const double expected = (1.0 + 3.0 + 27.0 / 7.0 + 18.0 / 7.0 + 27.0 / 35.0) * std::exp(-3.0);
  EXPECT_NEAR(matern_9_2(1.0, 1.0), expected, 1e-15);
  EXPECT_NEAR(matern_9_2(1.0, 1.0), 0.55758, 5e-5);
}

TEST(Matern, PositiveAndDecreasing) {
  double prev = 1.0;
  for (int i = 1; i <= 400; ++i) {
    const double k = matern_9_2(0.02 * i, 1.0);
    EXPECT_GT(k, 0.0);
    EXPECT_LT(k, prev);
    prev = k;
  }
}

TEST(Matern, RejectsNonPositiveLength) {
  EXPECT_EQ(kind_of([] { matern_9_2(0.1, 0.0); }), ErrorKind::parameter);
  EXPECT_EQ(kind_of([] { matern_9_2(0.1, -1.0); }), ErrorKind::parameter);
}

TEST(Covariance, UnitDiagonalAndNoCrossComponentCoupling) {
  const std::vector<Vec3> pts = sphere_points(1);
  const Eigen::MatrixXd c = dense(matern_covariance(pts, 1.0));
  ASSERT_EQ(c.rows(), 3 * static_cast<int>(pts.size()));
  for (int i = 0; i < c.rows(); ++i) EXPECT_EQ(c(i, i), 1.0);
  for (int i = 0; i < c.rows(); ++i)
    for (int j = 0; j < c.cols(); ++j)
      if (i % 3 != j % 3) EXPECT_EQ(c(i, j), 0.0);
  EXPECT_LE((c - c.transpose()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Covariance, InvariantUnderTranslation) {
  std::vector<Vec3> pts = sphere_points(1);
  const Eigen::MatrixXd a = dense(matern_covariance(pts, 0.5));
  for (Vec3& p : pts) p += Vec3(0.11, -0.07, 0.2);
  const Eigen::MatrixXd b = dense(matern_covariance(pts, 0.5));
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Covariance, RejectsEmptyPointSets) {
  EXPECT_EQ(kind_of([] { matern_covariance({}, 1.0); }), ErrorKind::parameter);
}

TEST(PivotedCholesky, RankOneInputIsRecoveredExactly) {
  const Eigen::VectorXd u = (Eigen::VectorXd(5) << 0.3, -1.2, 0.5, 2.0, 0.1).finished();
  MatrixAccessor c;
  c.size = 5;
  c.diagonal = [u](int i) { return u[i] * u[i]; };
  c.column = [u](int j, double* out) {
    for (int i = 0; i < 5; ++i) out[i] = u[i] * u[j];
  };
  const CovarianceFactor f = pivoted_cholesky(c, 1e-12, 5);
  ASSERT_EQ(f.L.cols(), 1);
  EXPECT_EQ(f.pivots.front(), 3);
  const double sign = f.L(3, 0) > 0.0 ? 1.0 : -1.0;
  EXPECT_LE((sign * f.L.col(0) - u).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(PivotedCholesky, FarSeparatedPointsGiveAPermutedIdentity) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 4; ++i) pts.emplace_back(0.3 * i, 0.0, 0.0);
  const CovarianceFactor f = pivoted_cholesky(matern_covariance(pts, 1e-3), 1e-14, 12);
  ASSERT_EQ(f.L.cols(), 12);
  // ties go to the lowest index, so the pivots come in natural order
  for (int k = 0; k < 12; ++k) EXPECT_EQ(f.pivots[k], k);
  EXPECT_LE((f.L - Eigen::MatrixXd::Identity(12, 12)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PivotedCholesky, SmoothKernelOnTheSphereHasLowRank) {
  const std::vector<Vec3> pts = sphere_points(3);
  const int n3 = 3 * static_cast<int>(pts.size());
  const CovarianceFactor f = pivoted_cholesky(matern_covariance(pts, 1.0), 1e-6, n3);
  EXPECT_LE(f.trace_residual, 1e-6 * n3);
  EXPECT_LT(f.L.cols(), n3 / 4);
  EXPECT_GE(f.residual_diagonal.minCoeff(), -1e-10);
}

TEST(PivotedCholesky, ReconstructsThePivotEntries) {
  const std::vector<Vec3> pts = sphere_points(2);
  const MatrixAccessor c = matern_covariance(pts, 1.0);
  const CovarianceFactor f = pivoted_cholesky(c, 1e-6, c.size);
  for (int p : f.pivots) EXPECT_LE(std::abs(f.residual_diagonal[p]), 1e-12);
  // whole pivot columns, not only the diagonal
  Eigen::VectorXd col(c.size);
  for (int p : f.pivots) {
    c.column(p, col.data());
    EXPECT_LE((col - f.L * f.L.row(p).transpose()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PivotedCholesky, RejectsNonPositiveTolerance) {
  const std::vector<Vec3> pts{Vec3::Zero()};
  EXPECT_EQ(kind_of([&] { pivoted_cholesky(matern_covariance(pts, 1.0), 0.0, 3); }), ErrorKind::parameter);
}

TEST(PivotedCholesky, IndefiniteInputIsABreakdown) {
  MatrixAccessor c;
  c.size = 2;
  c.diagonal = [](int) { return 1.0; };
  c.column = [](int j, double* out) {
    out[0] = j == 0 ? 1.0 : 2.0;
    out[1] = j == 0 ? 2.0 : 1.0;
  };
  EXPECT_EQ(kind_of([&] { pivoted_cholesky(c, 1e-12, 2); }), ErrorKind::numerical_breakdown);
}

TEST(Fields, EigenpairsNormsAndOrthogonality) {
  const std::vector<Vec3> pts = sphere_points(2);
  const MatrixAccessor c = matern_covariance(pts, 1.0);
  const CovarianceFactor f = pivoted_cholesky(c, 1e-6, c.size);
  const DeformationBasis b = extract_fields(f, 16);
  ASSERT_EQ(b.size(), 16);
  for (int k = 0; k < 16; ++k) {
    const Eigen::VectorXd v = b.fields.col(k);
    const double lam = b.eigenvalues[k];
    EXPECT_LE((f.L * (f.L.transpose() * v) - lam * v).norm(), 1e-8 * v.norm()) << k;
    EXPECT_NEAR(v.squaredNorm(), lam, 1e-8 * lam) << k;
    for (int m = 0; m < k; ++m)
      EXPECT_LE(std::abs(v.dot(b.fields.col(m))), 1e-8 * std::sqrt(lam * b.eigenvalues[m]));
    if (k > 0) {
      EXPECT_LE(lam, b.eigenvalues[k - 1]);
    }
    EXPECT_GE(lam, 0.0);
  }
}

TEST(Fields, AreReproducibleWithFixedSigns) {
  const PolynomialSurface s = sphere(0.3, 2);
  const DeformationBasis a = build_deformation_basis(s, 16, 1.0);
  const DeformationBasis b = build_deformation_basis(s, 16, 1.0);
  EXPECT_EQ(a.fields, b.fields);
  // the first nonzero entry of every reduced eigenvector is positive
  for (int k = 0; k < a.size(); ++k) {
    const Eigen::VectorXd vt = a.factor.L.colPivHouseholderQr().solve(a.fields.col(k));
    const double scale = vt.cwiseAbs().maxCoeff();
    for (int i = 0; i < vt.size(); ++i)
      if (std::abs(vt[i]) > 1e-6 * scale) {
        EXPECT_GT(vt[i], 0.0) << k;
        break;
      }
  }
}

TEST(Fields, TooManyModesIsAParameterError) {
  const std::vector<Vec3> pts{Vec3::Zero()};
  const CovarianceFactor f = pivoted_cholesky(matern_covariance(pts, 1.0), 1e-12, 3);
  EXPECT_EQ(kind_of([&] { extract_fields(f, 4); }), ErrorKind::parameter);
  EXPECT_EQ(kind_of([&] { extract_fields(f, 0); }), ErrorKind::parameter);
}

TEST(Fields, DisplacementMovesStencilPointsAndZeroKeepsTheSurface) {
  const PolynomialSurface s = sphere(0.3, 2);
  const DeformationBasis b = build_deformation_basis(s, 8, 1.0);
  const PolynomialSurface same = apply_displacement(s, b, Eigen::VectorXd::Zero(8));
  EXPECT_EQ(same.grid().unique_points, s.grid().unique_points);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(8);
  y[2] = 0.01;
  const PolynomialSurface moved = apply_displacement(s, b, y);
  const Eigen::MatrixX3d v = b.field(2);
  double worst = 0.0;
  for (size_t a = 0; a < s.grid().unique_points.size(); ++a)
    worst = std::max(worst, (moved.grid().unique_points[a] - s.grid().unique_points[a] -
                             0.01 * v.row(static_cast<int>(a)).transpose())
                                .cwiseAbs()
                                .maxCoeff());
  EXPECT_LE(worst, 1e-15);
  EXPECT_EQ(kind_of([&] { apply_displacement(s, b, Eigen::VectorXd::Zero(3)); }), ErrorKind::parameter);
}
