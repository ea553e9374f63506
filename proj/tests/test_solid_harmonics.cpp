#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <scaffold/solid_harmonics.hpp>

using namespace scaffold;

namespace {

Vec3 random_point(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  return {u(rng), u(rng), u(rng)};
}

}  // namespace

TEST(SolidHarmonics, AtTheOriginOnlyTheConstantSurvives) {
  const std::vector<double> r = solid_harmonic_values(Vec3::Zero(), 12);
  ASSERT_EQ(r.size(), 169u);
  EXPECT_EQ(r[0], 1.0);
  for (size_t i = 1; i < r.size(); ++i) EXPECT_EQ(r[i], 0.0);
}

TEST(SolidHarmonics, AreHomogeneousOfDegreeN) {
  std::mt19937 rng(11);
  for (int t = 0; t < 20; ++t) {
    const Vec3 z = random_point(rng);
    const auto a = solid_harmonic_values(z, 12), b = solid_harmonic_values(2.0 * z, 12);
    for (int n = 0; n <= 12; ++n)
      for (int l = -n; l <= n; ++l) {
        const int i = solid_harmonic_index(n, l);
        EXPECT_NEAR(b[i], std::ldexp(a[i], n), 1e-12 * std::ldexp(1.0, n)) << n << "," << l;
      }
  }
}

TEST(SolidHarmonics, LowDegreesMatchClosedForms) {
  const Vec3 z(0.3, -0.2, 0.5);
  const auto r = solid_harmonic_values(z, 2);
  // degree one: (-x/2, z, ... ) up to the sqrt normalization -> x, y, z up to sign and scale
  EXPECT_NEAR(r[solid_harmonic_index(1, 0)], z[2], 1e-15);
  EXPECT_NEAR(std::abs(r[solid_harmonic_index(1, 1)]), std::abs(z[0]) / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(std::abs(r[solid_harmonic_index(1, -1)]), std::abs(z[1]) / std::sqrt(2.0), 1e-15);
  // R_2^0 = z^2 - (x^2 + y^2)/2
  EXPECT_NEAR(r[solid_harmonic_index(2, 0)], z[2] * z[2] - 0.5 * (z[0] * z[0] + z[1] * z[1]), 1e-15);
}

TEST(SolidHarmonics, BoundedByRadiusToTheN) {
  std::mt19937 rng(5);
  for (int t = 0; t < 50; ++t) {
    const Vec3 z = random_point(rng);
    const auto r = solid_harmonic_values(z, 12);
    for (int n = 0; n <= 12; ++n)
      for (int l = -n; l <= n; ++l)
        EXPECT_LE(std::abs(r[solid_harmonic_index(n, l)]), std::pow(z.norm(), n) * (1.0 + 1e-12));
  }
}

TEST(SolidHarmonics, GradientsMatchCentralDifferences) {
  std::mt19937 rng(17);
  const double h = 1e-5;
  for (int t = 0; t < 10; ++t) {
    const Vec3 z = random_point(rng);
    const SolidHarmonicSet set = eval_solid_harmonics(z, 12);
    for (int d = 0; d < 3; ++d) {
      const auto p = solid_harmonic_values(z + h * Vec3::Unit(d), 12);
      const auto m = solid_harmonic_values(z - h * Vec3::Unit(d), 12);
      for (size_t i = 0; i < p.size(); ++i) {
        const double fd = (p[i] - m[i]) / (2.0 * h);
        const double scale = std::max(std::abs(set.gradients[i][d]), std::pow(z.norm(), 2));
        EXPECT_NEAR(set.gradients[i][d], fd, 1e-8 * scale) << "index " << i;
      }
    }
  }
}

// second differences extrapolated in h so truncation does not mask 1e-6
std::vector<double> fd_laplacian(const Vec3& z, double h) {
  auto plain = [&](double s) {
    const auto c = solid_harmonic_values(z, 10);
    std::vector<double> lap(c.size(), 0.0);
    for (int d = 0; d < 3; ++d) {
      const auto p = solid_harmonic_values(z + s * Vec3::Unit(d), 10);
      const auto m = solid_harmonic_values(z - s * Vec3::Unit(d), 10);
      for (size_t i = 0; i < c.size(); ++i) lap[i] += (p[i] - 2.0 * c[i] + m[i]) / (s * s);
    }
    return lap;
  };
  const auto coarse = plain(h), fine = plain(0.5 * h);
  std::vector<double> out(coarse.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = (4.0 * fine[i] - coarse[i]) / 3.0;
  return out;
}

TEST(SolidHarmonics, AreHarmonic) {
  std::mt19937 rng(23);
  for (int t = 0; t < 10; ++t) {
    const auto lap = fd_laplacian(random_point(rng), 3e-3);
    for (double v : lap) EXPECT_NEAR(v, 0.0, 1e-6);
  }
}

TEST(SolidHarmonics, SymbolicPolynomialsAgreeWithNumericValues) {
  const MonomialBasis mb(8);
  const Poly3 x = Poly3::monomial(&mb, 1, 0, 0), y = Poly3::monomial(&mb, 0, 1, 0), z = Poly3::monomial(&mb, 0, 0, 1),
              one = Poly3::monomial(&mb, 0, 0, 0);
  const auto polys = solid_harmonics(x, y, z, one, 8);
  const Vec3 p(0.21, -0.43, 0.17);
  const auto vals = solid_harmonic_values(p, 8);
  std::vector<double> m(mb.size());
  mb.evaluate(p, m.data());
  for (size_t i = 0; i < polys.size(); ++i) {
    double acc = 0.0;
    for (int k = 0; k < mb.size(); ++k) acc += polys[i].coefficients()[k] * m[k];
    EXPECT_NEAR(acc, vals[i], 1e-14);
  }
}

TEST(SolidHarmonics, NegativeDegreeIsAParameterError) {
  EXPECT_THROW(eval_solid_harmonics(Vec3::Zero(), -1), Error);
}
