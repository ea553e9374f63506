#include <map>
#include <random>

#include <gtest/gtest.h>

#include <scaffold/trace_space.hpp>

#include "test_support.hpp"

using namespace scaffold;
using scaffold::test::primitive;
using scaffold::test::sphere;

namespace {

double field_value(const TraceSpace& sp, const PolynomialSurface& s, const Eigen::VectorXd& c, int e, double u,
                   double v) {
  std::array<double, 81> val{};
  const auto [k1, k2] = s.element_index(e);
  sp.evaluate(k1, k2, u, v, val.data());
  double acc = 0.0;
  for (int l = 0; l < sp.local_count(); ++l) acc += val[l] * c[sp.global_index(s, e, l)];
  return acc;
}

}  // namespace

TEST(BSplines, PartitionOfUnityAndDerivativesByDifferences) {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int d = 0; d <= 5; ++d)
    for (int level = 0; level <= 3; ++level)
      for (int k = 0; k < (1 << level); ++k) {
        const double u = u01(rng);
        std::array<double, 9> val{}, der{}, vp{}, vm{};
        bspline_local(d, level, k, u, val.data(), der.data());
        double sum = 0.0, dsum = 0.0;
        for (int a = 0; a <= d; ++a) {
          sum += val[a];
          dsum += der[a];
          EXPECT_GE(val[a], -1e-15);
        }
        EXPECT_NEAR(sum, 1.0, 1e-14);
        EXPECT_NEAR(dsum, 0.0, 1e-12);
        const double h = 1e-6;
        bspline_local(d, level, k, u + h, vp.data(), nullptr);
        bspline_local(d, level, k, u - h, vm.data(), nullptr);
        for (int a = 0; a <= d; ++a) EXPECT_NEAR(der[a], (vp[a] - vm[a]) / (2 * h), 1e-6);
      }
}

TEST(TraceSpaces, PatchwiseDofCountOnTheCube) {
  const PolynomialSurface s = primitive(PrimitiveKind::cube, 2);
  const auto [dir, neu] = build_spaces(s, 2);
  EXPECT_EQ(neu.dof_count(), 216);
  EXPECT_EQ(neu.kind(), SpaceKind::neumann_patchwise);
  // continuous space: interior functions, one set per shared edge, one per corner
  const int m = 4 + 2;
  EXPECT_EQ(dir.dof_count(), 6 * (m - 2) * (m - 2) + 12 * (m - 2) + 8);
}

TEST(TraceSpaces, ContinuousSpaceCountsForSeveralDegreesAndLevels) {
  for (int level : {0, 1, 2, 3})
    for (int d : {1, 2, 3}) {
      const int m = (1 << level) + d;
      const TraceSpace sp = TraceSpace::build(sphere(0.3, level), SpaceKind::dirichlet_continuous, d);
      EXPECT_EQ(sp.dof_count(), 6 * (m - 2) * (m - 2) + 12 * (m - 2) + 8) << level << "," << d;
    }
}

TEST(TraceSpaces, PartitionOfUnityAtRandomPoints) {
  const PolynomialSurface s = sphere(0.3, 2);
  const TraceSpace sp = TraceSpace::build(s, SpaceKind::dirichlet_continuous, 2);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(sp.dof_count());
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, s.element_count() - 1);
  for (int t = 0; t < 10000; ++t) EXPECT_NEAR(field_value(sp, s, ones, pick(rng), u01(rng), u01(rng)), 1.0, 1e-12);
}

TEST(TraceSpaces, ContinuousFunctionsAgreeAtSharedStencilPoints) {
  const PolynomialSurface s = sphere(0.3, 2);
  for (int d : {1, 2, 3}) {
    const TraceSpace sp = TraceSpace::build(s, SpaceKind::dirichlet_continuous, d);
    Eigen::VectorXd c(sp.dof_count());
    for (int i = 0; i < c.size(); ++i) c[i] = std::sin(1.7 * i + 0.3);
    std::map<int, double> seen;
    int compared = 0;
    for (int e = 0; e < s.element_count(); ++e) {
      const auto ids = s.corner_ids(e);
      for (int corner = 0; corner < 4; ++corner) {
        const double val = field_value(sp, s, c, e, corner & 1, corner >> 1);
        auto [it, fresh] = seen.emplace(ids[corner], val);
        if (!fresh) {
          EXPECT_NEAR(val, it->second, 1e-13);
          ++compared;
        }
      }
    }
    EXPECT_GT(compared, 0);
  }
}

TEST(TraceSpaces, PatchwiseSpaceIsDiscontinuousAcrossPatches) {
  const PolynomialSurface s = sphere(0.3, 1);
  const TraceSpace sp = TraceSpace::build(s, SpaceKind::neumann_patchwise, 1);
  for (int i = 0; i < sp.patchwise_count(); ++i) EXPECT_EQ(sp.dof_of(i), i);
}

TEST(TraceSpaces, InvalidDegreesAndOpenSurfacesAreRejected) {
  const PolynomialSurface s = sphere(0.3, 1);
  EXPECT_THROW(TraceSpace::build(s, SpaceKind::dirichlet_continuous, 0), Error);
  EXPECT_NO_THROW(TraceSpace::build(s, SpaceKind::neumann_patchwise, 0));
  EXPECT_THROW(TraceSpace::build(s, SpaceKind::neumann_patchwise, kMaxSplineDegree + 1), Error);
  auto maps = generate_primitive(PrimitiveKind::cube, {});
  maps.pop_back();
  const PolynomialSurface open = build_surface(maps, 1);
  try {
    TraceSpace::build(open, SpaceKind::dirichlet_continuous, 2);
    FAIL() << "open surface accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::topology);
  }
}
