#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include <scaffold/optimizer.hpp>

#include "test_support.hpp"

using namespace scaffold;
using namespace scaffold::test;

namespace {

ShapeOptimizer sphere_optimizer(const Mat3& target, int p = 16, int level = 2, int max_iter = 25) {
  PolynomialSurface ref = sphere(0.3, level);
  DeformationBasis basis = build_deformation_basis(ref, p, 1.0);
  OptimizationConfig cfg;
  cfg.target = target;
  cfg.level = level;
  cfg.max_iter = max_iter;
  return ShapeOptimizer(std::move(ref), std::move(basis), kernel12(), cfg);
}

Mat3 tensor_of(const PolynomialSurface& s) {
  return effective_tensor(s, solve_n2d(assemble_operators(s, 2, kernel12())));
}

}  // namespace

TEST(LineSearch, ExactQuadraticIsMinimizedInOneFit) {
  for (double a : {0.3, 1.0, 1.7}) {
    auto phi = [a](double t) { return (t - a) * (t - a); };
    const LineSearchResult r = line_search(phi, a * a, 1.0);
    EXPECT_NEAR(r.step, a, 1e-12) << a;
    EXPECT_EQ(r.rejected, 0);
    EXPECT_LT(r.value, a * a);
  }
}

TEST(LineSearch, AcceptedStepDecreasesTheFunctional) {
  auto phi = [](double t) { return std::cos(3.0 * t) + 0.1 * t; };
  const LineSearchResult r = line_search(phi, phi(0.0), 2.0);
  EXPECT_LT(phi(r.step), phi(0.0));
  EXPECT_EQ(r.value, phi(r.step));
  EXPECT_GT(r.step, 0.0);
}

TEST(LineSearch, InadmissibleProbesShrinkTheStep) {
  auto phi = [](double t) { return t > 0.05 ? std::numeric_limits<double>::infinity() : 1.0 - t; };
  const LineSearchResult r = line_search(phi, 1.0, 1.0);
  EXPECT_GT(r.rejected, 0);
  EXPECT_LE(r.step, 0.05);
  EXPECT_LT(r.value, 1.0);
}

TEST(LineSearch, FailsAfterTenReductions) {
  int calls = 0;
  auto phi = [&](double t) {
    ++calls;
    return 1.0 + t;
  };
  EXPECT_EQ(kind_of([&] { line_search(phi, 1.0, 1.0); }), ErrorKind::line_search_failure);
  EXPECT_GE(calls, 22);
  EXPECT_EQ(kind_of([&] { line_search(phi, 1.0, 0.0); }), ErrorKind::parameter);
}

TEST(Optimizer, RejectsInvalidConfigurations) {
  const PolynomialSurface ref = sphere(0.3, 1);
  const DeformationBasis basis = build_deformation_basis(ref, 2, 1.0);
  OptimizationConfig cfg;
  cfg.j_tol = 0.0;
  EXPECT_EQ(kind_of([&] { ShapeOptimizer(ref, basis, kernel12(), cfg); }), ErrorKind::parameter);
  cfg = {};
  cfg.max_iter = 0;
  EXPECT_EQ(kind_of([&] { ShapeOptimizer(ref, basis, kernel12(), cfg); }), ErrorKind::parameter);
  cfg = {};
  cfg.target(0, 1) = 0.1;
  EXPECT_EQ(kind_of([&] { ShapeOptimizer(ref, basis, kernel12(), cfg); }), ErrorKind::parameter);
}

TEST(Optimizer, SelfTargetStopsImmediately) {
  const Mat3 a0 = tensor_of(sphere(0.3, 2));
  ShapeOptimizer opt = sphere_optimizer(a0);
  const Evaluation ev = opt.evaluate(Eigen::VectorXd::Zero(16));
  EXPECT_LE(ev.J, 1e-20);
  const auto hist = opt.run();
  ASSERT_EQ(hist.size(), 1u);
  EXPECT_TRUE(opt.converged());
  EXPECT_EQ(hist[0].step, 0.0);
}

TEST(Optimizer, InitialMisfitForTheFirstTargetExceedsTheTolerance) {
  const ShapeOptimizer opt = sphere_optimizer(0.9 * Mat3::Identity());
  const Evaluation ev = opt.evaluate(Eigen::VectorXd::Zero(16));
  EXPECT_GT(ev.J, 1e-5);
  // close to the dilute estimate 1 - 3f/2 = 0.83
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(ev.tensor(i, i), 0.84, 0.02);
}

TEST(Optimizer, HugeStepsAreRejected) {
  const ShapeOptimizer opt = sphere_optimizer(0.9 * Mat3::Identity());
  Eigen::VectorXd y = Eigen::VectorXd::Zero(16);
  y[0] = 1e3;
  EXPECT_EQ(kind_of([&] { opt.evaluate(y); }), ErrorKind::step_rejected);
  EXPECT_EQ(opt.functional_or_inf(y), std::numeric_limits<double>::infinity());
}

TEST(Optimizer, ShortRunIsMonotoneReproducibleAndRecomputable) {
  ShapeOptimizer a = sphere_optimizer(0.9 * Mat3::Identity(), 4, 2, 2);
  ShapeOptimizer b = sphere_optimizer(0.9 * Mat3::Identity(), 4, 2, 2);
  const auto ha = a.run();
  const auto hb = b.run();
  ASSERT_EQ(ha.size(), hb.size());
  ASSERT_GE(ha.size(), 2u);
  for (size_t i = 0; i < ha.size(); ++i) {
    EXPECT_EQ(ha[i].J, hb[i].J);
    EXPECT_EQ(ha[i].y, hb[i].y);
    if (i > 0) {
      EXPECT_LT(ha[i].J, ha[i - 1].J);
      EXPECT_GT(ha[i].step, 0.0);
    }
  }
  const PolynomialSurface rebuilt = apply_displacement(a.reference(), a.basis(), ha.back().y);
  const PolynomialSurface& stored = a.final_state()->surface;
  double worst = 0.0;
  for (size_t i = 0; i < rebuilt.grid().unique_points.size(); ++i)
    worst = std::max(worst, (rebuilt.grid().unique_points[i] - stored.grid().unique_points[i]).cwiseAbs().maxCoeff());
  EXPECT_LE(worst, 1e-12);
}
