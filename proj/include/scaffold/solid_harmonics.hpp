#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "core.hpp"

namespace scaffold {

/// Forward-mode dual number carrying a value and its three Cartesian
/// partial derivatives.
struct Dual3 {
  double v = 0.0;
  std::array<double, 3> d{0.0, 0.0, 0.0};

  static Dual3 variable(double value, int axis) {
    Dual3 r{value, {0.0, 0.0, 0.0}};
    r.d[axis] = 1.0;
    return r;
  }
  static Dual3 constant(double value) { return Dual3{value, {0.0, 0.0, 0.0}}; }
};

inline Dual3 operator+(const Dual3& a, const Dual3& b) {
  return {a.v + b.v, {a.d[0] + b.d[0], a.d[1] + b.d[1], a.d[2] + b.d[2]}};
}
inline Dual3 operator-(const Dual3& a, const Dual3& b) {
  return {a.v - b.v, {a.d[0] - b.d[0], a.d[1] - b.d[1], a.d[2] - b.d[2]}};
}
inline Dual3 operator*(const Dual3& a, const Dual3& b) {
  return {a.v * b.v,
          {a.d[0] * b.v + a.v * b.d[0], a.d[1] * b.v + a.v * b.d[1], a.d[2] * b.v + a.v * b.d[2]}};
}
inline Dual3 operator*(const Dual3& a, double s) { return {a.v * s, {a.d[0] * s, a.d[1] * s, a.d[2] * s}}; }
inline Dual3 operator*(double s, const Dual3& a) { return a * s; }

/// Monomials x^a y^b z^c of total degree <= N in a fixed order.
class MonomialBasis {
 public:
  MonomialBasis() = default;
  explicit MonomialBasis(int degree) : degree_(degree) {
    const int n1 = degree + 1;
    index_.assign(static_cast<size_t>(n1) * n1 * n1, -1);
    for (int total = 0; total <= degree; ++total)
      for (int a = total; a >= 0; --a)
        for (int b = total - a; b >= 0; --b) {
          const int c = total - a - b;
          index_[(a * n1 + b) * n1 + c] = static_cast<int>(exponents_.size());
          exponents_.push_back({a, b, c});
        }
  }
  int degree() const { return degree_; }
  int size() const { return static_cast<int>(exponents_.size()); }
  const std::array<int, 3>& exponent(int i) const { return exponents_[i]; }
  /// -1 when the total degree exceeds N.
  int index(int a, int b, int c) const {
    if (a < 0 || b < 0 || c < 0 || a + b + c > degree_) return -1;
    const int n1 = degree_ + 1;
    return index_[(a * n1 + b) * n1 + c];
  }

  /// All monomial values at x.
  void evaluate(const Vec3& x, double* out) const {
    std::array<std::array<double, 33>, 3> pw{};
    for (int d = 0; d < 3; ++d) {
      pw[d][0] = 1.0;
      for (int k = 1; k <= degree_; ++k) pw[d][k] = pw[d][k - 1] * x[d];
    }
    for (int i = 0; i < size(); ++i) {
      const auto& e = exponents_[i];
      out[i] = pw[0][e[0]] * pw[1][e[1]] * pw[2][e[2]];
    }
  }

  /// Directional derivative <dir, grad x^e> of all monomials at x.
  void evaluate_directional(const Vec3& x, const Vec3& dir, double* out) const {
    std::array<std::array<double, 33>, 3> pw{};
    for (int d = 0; d < 3; ++d) {
      pw[d][0] = 1.0;
      for (int k = 1; k <= degree_; ++k) pw[d][k] = pw[d][k - 1] * x[d];
    }
    for (int i = 0; i < size(); ++i) {
      const auto& e = exponents_[i];
      double acc = 0.0;
      if (e[0] > 0) acc += dir[0] * e[0] * pw[0][e[0] - 1] * pw[1][e[1]] * pw[2][e[2]];
      if (e[1] > 0) acc += dir[1] * e[1] * pw[0][e[0]] * pw[1][e[1] - 1] * pw[2][e[2]];
      if (e[2] > 0) acc += dir[2] * e[2] * pw[0][e[0]] * pw[1][e[1]] * pw[2][e[2] - 1];
      out[i] = acc;
    }
  }

 private:
  int degree_ = 0;
  std::vector<int> index_;
  std::vector<std::array<int, 3>> exponents_;
};

/// Dense trivariate polynomial over a MonomialBasis; products are truncated
/// at the basis degree.
class Poly3 {
 public:
  Poly3() = default;
  explicit Poly3(const MonomialBasis* basis) : basis_(basis), c_(basis->size(), 0.0) {}

  static Poly3 monomial(const MonomialBasis* basis, int a, int b, int c, double coef = 1.0) {
    Poly3 p(basis);
    p.c_[basis->index(a, b, c)] = coef;
    return p;
  }

  const MonomialBasis* basis() const { return basis_; }
  const std::vector<double>& coefficients() const { return c_; }
  std::vector<double>& coefficients() { return c_; }

  friend Poly3 operator+(Poly3 a, const Poly3& b) {
    for (size_t i = 0; i < a.c_.size(); ++i) a.c_[i] += b.c_[i];
    return a;
  }
  friend Poly3 operator-(Poly3 a, const Poly3& b) {
    for (size_t i = 0; i < a.c_.size(); ++i) a.c_[i] -= b.c_[i];
    return a;
  }
  friend Poly3 operator*(Poly3 a, double s) {
    for (double& v : a.c_) v *= s;
    return a;
  }
  friend Poly3 operator*(double s, Poly3 a) { return a * s; }
  friend Poly3 operator*(const Poly3& a, const Poly3& b) {
    Poly3 r(a.basis_);
    const MonomialBasis& m = *a.basis_;
    for (int i = 0; i < m.size(); ++i) {
      if (a.c_[i] == 0.0) continue;
      const auto& ei = m.exponent(i);
      for (int j = 0; j < m.size(); ++j) {
        if (b.c_[j] == 0.0) continue;
        const auto& ej = m.exponent(j);
        const int k = m.index(ei[0] + ej[0], ei[1] + ej[1], ei[2] + ej[2]);
        if (k >= 0) r.c_[k] += a.c_[i] * b.c_[j];
      }
    }
    return r;
  }

 private:
  const MonomialBasis* basis_ = nullptr;
  std::vector<double> c_;
};

/// Number of real solid harmonics of degree <= N.
inline int solid_harmonic_count(int degree) { return (degree + 1) * (degree + 1); }

/// Flat index of the real harmonic (n, l), l = -n..n.
inline int solid_harmonic_index(int n, int l) { return n * n + n + l; }

/// Real regular solid harmonics R_n^l, n = 0..N, through the Cartesian
/// recurrences of the complex harmonics r^n P_n^m(cos t) e^{i m phi}/(n+m)!,
/// rescaled by sqrt((n-m)!(n+m)!) so that |R_n^l| <= r^n. Entries with l >= 0
/// are real parts (cosine type), l < 0 imaginary parts (sine type). The
/// scalar type may be double, Dual3 or Poly3.
template <typename T>
std::vector<T> solid_harmonics(const T& x, const T& y, const T& z, const T& one, int degree) {
  const int n1 = degree + 1;
  std::vector<T> re(static_cast<size_t>(n1) * n1, one * 0.0), im(static_cast<size_t>(n1) * n1, one * 0.0);
  auto at = [n1](int n, int m) { return static_cast<size_t>(n) * n1 + m; };
  const T r2 = x * x + y * y + z * z;
  re[at(0, 0)] = one;
  for (int m = 1; m <= degree; ++m) {
    const double s = -1.0 / (2.0 * m);
    const T& a = re[at(m - 1, m - 1)];
    const T& b = im[at(m - 1, m - 1)];
    re[at(m, m)] = (a * x - b * y) * s;
    im[at(m, m)] = (a * y + b * x) * s;
  }
  for (int m = 0; m < degree; ++m) {
    re[at(m + 1, m)] = z * re[at(m, m)];
    im[at(m + 1, m)] = z * im[at(m, m)];
    for (int n = m + 2; n <= degree; ++n) {
      const double s = 1.0 / (static_cast<double>(n + m) * (n - m));
      re[at(n, m)] = (z * re[at(n - 1, m)] * (2.0 * n - 1.0) - r2 * re[at(n - 2, m)]) * s;
      im[at(n, m)] = (z * im[at(n - 1, m)] * (2.0 * n - 1.0) - r2 * im[at(n - 2, m)]) * s;
    }
  }
  std::vector<T> out(static_cast<size_t>(solid_harmonic_count(degree)), one * 0.0);
  for (int n = 0; n <= degree; ++n)
    for (int m = 0; m <= n; ++m) {
      const double scale = std::sqrt(std::tgamma(n - m + 1.0) * std::tgamma(n + m + 1.0));
      out[solid_harmonic_index(n, m)] = re[at(n, m)] * scale;
      if (m > 0) out[solid_harmonic_index(n, -m)] = im[at(n, m)] * scale;
    }
  return out;
}

/// Values and Cartesian gradients of all real solid harmonics at z.
struct SolidHarmonicSet {
  int degree = 0;
  std::vector<double> values;
  std::vector<Vec3> gradients;
};

inline SolidHarmonicSet eval_solid_harmonics(const Vec3& z, int degree) {
  if (degree < 0) fail(ErrorKind::parameter, "solid harmonic degree must be nonnegative");
  const auto d = solid_harmonics(Dual3::variable(z[0], 0), Dual3::variable(z[1], 1),
                                 Dual3::variable(z[2], 2), Dual3::constant(1.0), degree);
  SolidHarmonicSet set;
  set.degree = degree;
  set.values.reserve(d.size());
  set.gradients.reserve(d.size());
  for (const Dual3& v : d) {
    set.values.push_back(v.v);
    set.gradients.emplace_back(v.d[0], v.d[1], v.d[2]);
  }
  return set;
}

/// Values only.
inline std::vector<double> solid_harmonic_values(const Vec3& z, int degree) {
  return solid_harmonics(z[0], z[1], z[2], 1.0, degree);
}

}  // namespace scaffold
