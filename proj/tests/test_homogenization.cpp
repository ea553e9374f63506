#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <scaffold/homogenization.hpp>

#include "test_support.hpp"

using namespace scaffold;
using scaffold::test::kernel12;
using scaffold::test::primitive;
using scaffold::test::sphere;

namespace {

Mat3 tensor_of(const PolynomialSurface& s) {
  return effective_tensor(s, solve_n2d(assemble_operators(s, 2, kernel12())));
}

Eigen::MatrixX3d unique_field(const PolynomialSurface& s, const std::function<Vec3(const Vec3&)>& f) {
  const auto& pts = s.grid().unique_points;
  Eigen::MatrixX3d v(pts.size(), 3);
  for (size_t i = 0; i < pts.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = f(pts[i]).transpose();
  return v;
}

}  // namespace

TEST(EffectiveTensor, DiluteSphereMatchesTheMaxwellLimit) {
  const double r = 0.15, f = 4.0 * kPi * r * r * r / 3.0;
  const Mat3 a = tensor_of(sphere(r, 3));
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(a(i, i), 1.0 - 1.5 * f, 1e-3);
    for (int j = 0; j < 3; ++j)
      if (i != j) EXPECT_LE(std::abs(a(i, j)), 1e-3);
  }
}

TEST(EffectiveTensor, VanishingCavityGivesTheIdentity) {
  EXPECT_LE((tensor_of(sphere(0.05, 2)) - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(EffectiveTensor, CubeHasEqualDiagonalEntries) {
  const Mat3 a = tensor_of(primitive(PrimitiveKind::cube, 2));
  EXPECT_NEAR(a(0, 0), a(1, 1), 1e-3);
  EXPECT_NEAR(a(1, 1), a(2, 2), 1e-3);
  EXPECT_LE((a - a.transpose()).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LT(a(0, 0), 1.0);
}

TEST(EffectiveTensor, RotatedCubeIsTheRotatedTensor) {
  PrimitiveParams p;
  p.rotation = reference_rotation();
  const Mat3 t = reference_rotation();
  const Mat3 a = tensor_of(primitive(PrimitiveKind::cube, 2));
  const Mat3 b = tensor_of(primitive(PrimitiveKind::rotated_cube, 2, p));
  EXPECT_LE((b - t * a * t.transpose()).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(ShapeFunctional, ValuesAndPermutationInvariance) {
  const Mat3 a = Mat3::Identity();
  EXPECT_EQ(shape_functional(a, a), 0.0);
  EXPECT_NEAR(shape_functional(a, 0.9 * Mat3::Identity()), 0.015, 1e-15);
  Mat3 x, y;
  x << 0.9, 0.01, 0.02, 0.01, 0.8, 0.0, 0.02, 0.0, 0.7;
  y << 0.85, 0.0, 0.01, 0.0, 0.88, 0.03, 0.01, 0.03, 0.9;
  Mat3 p;
  p << 0, 1, 0, 0, 0, 1, 1, 0, 0;
  EXPECT_NEAR(shape_functional(p * x * p.transpose(), p * y * p.transpose()), shape_functional(x, y), 1e-16);
}

TEST(ShapeDerivative, TangentialFieldsDoNotChangeTheTensor) {
  const PolynomialSurface s = primitive(PrimitiveKind::cube, 2);
  const CellSolution sol = solve_n2d(assemble_operators(s, 2, kernel12()));
  // in-plane field on the interior stencil points of the top face
  const Eigen::MatrixX3d v = unique_field(s, [](const Vec3& x) -> Vec3 {
    const bool top = x[2] > 0.15 - 1e-12 && std::abs(x[0]) < 0.15 - 1e-9 && std::abs(x[1]) < 0.15 - 1e-9;
    return top ? Vec3(std::cos(7 * x[0]), x[1] * x[0], 0.0) : Vec3::Zero();
  });
  EXPECT_LE(shape_derivative_coefficient(s, sol, v).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ShapeDerivative, IsLinearInTheField) {
  const PolynomialSurface s = sphere(0.2, 1);
  const CellSolution sol = solve_n2d(assemble_operators(s, 2, kernel12()));
  const ShapeDensity sd = shape_density(s, sol);
  const Eigen::MatrixX3d v1 = unique_field(s, [](const Vec3& x) { return Vec3(x[1], -x[0] * x[2], 1.0); });
  const Eigen::MatrixX3d v2 = unique_field(s, [](const Vec3& x) { return Vec3(std::sin(x[2]), 0.3, x[0]); });
  const Mat3 lhs = shape_derivative_coefficient(s, sd, 2.5 * v1 - 0.7 * v2);
  const Mat3 rhs = 2.5 * shape_derivative_coefficient(s, sd, v1) - 0.7 * shape_derivative_coefficient(s, sd, v2);
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ShapeDerivative, NormalFieldMatchesFiniteDifferencesAtLevelThree) {
  const PolynomialSurface s = sphere(0.2, 3);
  const CellSolution sol = solve_n2d(assemble_operators(s, 2, kernel12()));
  const Eigen::MatrixX3d v = unique_field(s, [](const Vec3& x) { return Vec3(x.normalized()); });
  const Mat3 d = shape_derivative_coefficient(s, sol, v);
  const double h = 1e-4;
  const Mat3 fd = (tensor_of(displace(s, h * v)) - tensor_of(displace(s, -h * v))) / (2 * h);
  for (int i = 0; i < 3; ++i) EXPECT_LE(std::abs(fd(i, i) - d(i, i)) / std::abs(fd(i, i)), 1e-2);
  // the summed trace equals the surface integral of sum_i |e_i + grad w_i|^2 - 1, with a minus sign
  EXPECT_LT(d.trace(), 0.0);
}

TEST(ShapeGradient, VanishesAtTheTargetAndScalesWithTheResidual) {
  std::vector<Mat3> ders;
  std::mt19937 rng(14);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 5; ++k) {
    Mat3 m;
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = nd(rng);
    ders.push_back(m);
  }
  Mat3 a;
  a << 0.9, 0.01, 0.0, 0.01, 0.8, 0.0, 0.0, 0.0, 0.85;
  EXPECT_EQ(shape_gradient(a, a, ders), Eigen::VectorXd::Zero(5));
  const Mat3 b = 0.7 * Mat3::Identity();
  const Eigen::VectorXd g1 = shape_gradient(a, b, ders);
  const Eigen::VectorXd g2 = shape_gradient(a, b - (a - b), ders);
  EXPECT_LE((g2 - 2.0 * g1).cwiseAbs().maxCoeff(), 1e-14);
}
