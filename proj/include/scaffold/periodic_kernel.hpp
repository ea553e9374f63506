#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SVD>
#include <json.hpp>

#include "core.hpp"
#include "quadrature.hpp"
#include "solid_harmonics.hpp"

namespace scaffold {

/// Fitted coefficients of the solid-harmonics correction of the periodic
/// Green's function, alpha(n,l) at solid_harmonic_index(n,l). alpha(0,0) is
/// the gauge and always zero.
struct KernelCoefficients {
  int degree = 0;
  std::vector<double> alpha;
  /// max |k(z) - k(z + e_d)| over the validation set
  double residual = 0.0;
  /// max |grad k(z) - grad k(z + e_d)| over the validation set
  double gradient_residual = 0.0;
  int samples_per_face = 0;
  int validation_samples = 0;
  /// ratio of extreme singular values of the column-scaled fit matrix
  double condition = 0.0;
};

namespace detail {

inline constexpr double kInv4Pi = 1.0 / (4.0 * kPi);

// 27 image terms plus |z|^2/6.
inline double image_sum(const Vec3& z) {
  double acc = 0.0;
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b)
      for (int c = -1; c <= 1; ++c) acc += 1.0 / (z - Vec3(a, b, c)).norm();
  return kInv4Pi * acc + z.squaredNorm() / 6.0;
}

inline Vec3 image_sum_gradient(const Vec3& z) {
  Vec3 acc = Vec3::Zero();
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b)
      for (int c = -1; c <= 1; ++c) {
        const Vec3 d = z - Vec3(a, b, c);
        const double r = d.norm();
        acc -= d / (r * r * r);
      }
  return kInv4Pi * acc + z / 3.0;
}

inline Vec3 face_point(int axis, double s, double t) {
  Vec3 z;
  z[axis] = -0.5;
  z[(axis + 1) % 3] = s;
  z[(axis + 2) % 3] = t;
  return z;
}

}  // namespace detail

/// The Y-periodic Laplace Green's function
///   k(z) = 1/(4 pi) sum_{m in {-1,0,1}^3} 1/|z - m| + |z|^2/6 + sum alpha R(z),
/// normalized by -Laplace k = delta_0 - 1 on the torus.
class PeriodicKernel {
 public:
  PeriodicKernel() = default;
  explicit PeriodicKernel(KernelCoefficients coefficients)
      : coef_(std::move(coefficients)), monomials_(std::max(coef_.degree, 2)) {
    if (static_cast<int>(coef_.alpha.size()) != solid_harmonic_count(coef_.degree))
      fail(ErrorKind::parameter, "coefficient vector length does not match the degree");
    // monomial form of |z|^2/6 + correction, used by the separable assembly
    const MonomialBasis* mb = &monomials_;
    const Poly3 x = Poly3::monomial(mb, 1, 0, 0), y = Poly3::monomial(mb, 0, 1, 0),
                z = Poly3::monomial(mb, 0, 0, 1), one = Poly3::monomial(mb, 0, 0, 0);
    Poly3 acc = (x * x + y * y + z * z) * (1.0 / 6.0);
    const std::vector<Poly3> harm = solid_harmonics(x, y, z, one, coef_.degree);
    for (size_t i = 0; i < harm.size(); ++i)
      if (coef_.alpha[i] != 0.0) acc = acc + harm[i] * coef_.alpha[i];
    polynomial_ = acc.coefficients();
  }

  const KernelCoefficients& coefficients() const { return coef_; }
  int degree() const { return coef_.degree; }

  /// Correction series sum alpha R(z).
  double correction(const Vec3& z) const {
    const std::vector<double> r = solid_harmonic_values(z, coef_.degree);
    double acc = 0.0;
    for (size_t i = 0; i < r.size(); ++i) acc += coef_.alpha[i] * r[i];
    return acc;
  }

  Vec3 correction_gradient(const Vec3& z) const {
    const SolidHarmonicSet s = eval_solid_harmonics(z, coef_.degree);
    Vec3 acc = Vec3::Zero();
    for (size_t i = 0; i < s.values.size(); ++i) acc += coef_.alpha[i] * s.gradients[i];
    return acc;
  }

  /// Ansatz evaluated without reduction to the cell; accurate wherever the
  /// correction series is (|z| below roughly 1).
  double ansatz(const Vec3& z) const { return detail::image_sum(z) + correction(z); }
  Vec3 ansatz_gradient(const Vec3& z) const {
    return detail::image_sum_gradient(z) + correction_gradient(z);
  }

  /// k_per(z); z is first reduced to the cell by periodicity. Requires
  /// ||z||_inf <= 1 and z != 0.
  double value(const Vec3& z) const { return ansatz(reduce(z)); }
  Vec3 gradient(const Vec3& z) const { return ansatz_gradient(reduce(z)); }

  /// k_per(z) - 1/(4 pi |z|) without cell reduction: the 26 outer images, the
  /// quadratic term and the correction. Smooth near z = 0.
  double remainder(const Vec3& z) const {
    double acc = 0.0;
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b)
        for (int c = -1; c <= 1; ++c)
          if (a != 0 || b != 0 || c != 0) acc += 1.0 / (z - Vec3(a, b, c)).norm();
    return detail::kInv4Pi * acc + z.squaredNorm() / 6.0 + correction(z);
  }

  /// Monomial coefficients of |z|^2/6 + correction over monomials().
  const std::vector<double>& polynomial() const { return polynomial_; }
  const MonomialBasis& monomials() const { return monomials_; }

  double polynomial_value(const Vec3& z) const {
    std::vector<double> m(monomials_.size());
    monomials_.evaluate(z, m.data());
    double acc = 0.0;
    for (size_t i = 0; i < m.size(); ++i) acc += polynomial_[i] * m[i];
    return acc;
  }

 private:
  static Vec3 reduce(const Vec3& z) {
    if (!(z.cwiseAbs().maxCoeff() <= 1.0))
      fail(ErrorKind::parameter, "kernel argument outside the closed cell neighborhood");
    Vec3 w = z;
    for (int d = 0; d < 3; ++d) w[d] -= std::round(w[d]);
    if (w.isZero(0.0)) fail(ErrorKind::singular_evaluation, "kernel evaluated at a lattice point");
    return w;
  }

  KernelCoefficients coef_;
  MonomialBasis monomials_;
  std::vector<double> polynomial_;
};

/// Periodicity deviations of a kernel on the face pairs over a uniform
/// midpoint grid with `per_side` points per direction.
inline std::pair<double, double> periodicity_residual(const PeriodicKernel& k, int per_side) {
  double rv = 0.0, rg = 0.0;
  for (int axis = 0; axis < 3; ++axis)
    for (int i = 0; i < per_side; ++i)
      for (int j = 0; j < per_side; ++j) {
        const double s = (i + 0.5) / per_side - 0.5, t = (j + 0.5) / per_side - 0.5;
        const Vec3 z = detail::face_point(axis, s, t);
        Vec3 zp = z;
        zp[axis] += 1.0;
        rv = std::max(rv, std::abs(k.ansatz(z) - k.ansatz(zp)));
        rg = std::max(rg, (k.ansatz_gradient(z) - k.ansatz_gradient(zp)).cwiseAbs().maxCoeff());
      }
  return {rv, rg};
}

/// Least-squares fit of the correction coefficients so that the ansatz and
/// its gradient agree on opposite faces of the cell. Samples are Gauss grids
/// with `samples_per_face` points per direction on each of the three face
/// pairs; the stored residual comes from an independent midpoint grid.
inline KernelCoefficients fit_correction(int degree, int samples_per_face = 20) {
  if (degree < 2) fail(ErrorKind::parameter, "correction degree must be at least 2");
  if (samples_per_face < 2) fail(ErrorKind::parameter, "too few samples per face");
  const int nh = solid_harmonic_count(degree);
  const int unknowns = nh - 1;
  const int pts = 3 * samples_per_face * samples_per_face;
  Eigen::MatrixXd a(4 * pts, unknowns);
  Eigen::VectorXd rhs(4 * pts);
  const GaussRule& g = gauss_legendre(samples_per_face);
  int row = 0;
  for (int axis = 0; axis < 3; ++axis)
    for (int i = 0; i < samples_per_face; ++i)
      for (int j = 0; j < samples_per_face; ++j) {
        const Vec3 z = detail::face_point(axis, g.points[i] - 0.5, g.points[j] - 0.5);
        Vec3 zp = z;
        zp[axis] += 1.0;
        const SolidHarmonicSet h0 = eval_solid_harmonics(z, degree);
        const SolidHarmonicSet h1 = eval_solid_harmonics(zp, degree);
        for (int c = 1; c < nh; ++c) a(row, c - 1) = h1.values[c] - h0.values[c];
        rhs[row] = detail::image_sum(z) - detail::image_sum(zp);
        const Vec3 dg = detail::image_sum_gradient(z) - detail::image_sum_gradient(zp);
        for (int d = 0; d < 3; ++d) {
          for (int c = 1; c < nh; ++c) a(row + 1 + d, c - 1) = h1.gradients[c][d] - h0.gradients[c][d];
          rhs[row + 1 + d] = dg[d];
        }
        row += 4;
      }
  Eigen::VectorXd scale(unknowns);
  for (int c = 0; c < unknowns; ++c) {
    scale[c] = a.col(c).norm();
    if (!(scale[c] > 0.0)) scale[c] = 1.0;
    a.col(c) /= scale[c];
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cond = sv[0] / sv[sv.size() - 1];
  if (!(sv[sv.size() - 1] > 1e-13 * sv[0])) {
    std::ostringstream os;
    os << "rank-deficient periodicity system (condition " << cond << ")";
    fail(ErrorKind::fitting_failure, os.str());
  }
  const Eigen::VectorXd sol = svd.solve(rhs);
  KernelCoefficients kc;
  kc.degree = degree;
  kc.alpha.assign(nh, 0.0);
  for (int c = 0; c < unknowns; ++c) kc.alpha[c + 1] = sol[c] / scale[c];
  kc.samples_per_face = samples_per_face;
  kc.validation_samples = samples_per_face + 5;
  kc.condition = cond;
  const PeriodicKernel k(kc);
  const auto [rv, rg] = periodicity_residual(k, kc.validation_samples);
  kc.residual = rv;
  kc.gradient_residual = rg;
  return kc;
}

inline constexpr int kKernelCacheVersion = 1;

inline nlohmann::json to_json(const KernelCoefficients& k) {
  return nlohmann::json{{"format", "scaffold-kernel-coefficients"},
                        {"version", kKernelCacheVersion},
                        {"degree", k.degree},
                        {"alpha", k.alpha},
                        {"residual", k.residual},
                        {"gradient_residual", k.gradient_residual},
                        {"samples_per_face", k.samples_per_face},
                        {"validation_samples", k.validation_samples},
                        {"condition", k.condition}};
}

inline KernelCoefficients kernel_coefficients_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "scaffold-kernel-coefficients")
      fail(ErrorKind::schema, "not a kernel coefficient file");
    if (j.at("version").get<int>() != kKernelCacheVersion)
      fail(ErrorKind::schema, "unsupported kernel cache version");
    KernelCoefficients k;
    k.degree = j.at("degree").get<int>();
    k.alpha = j.at("alpha").get<std::vector<double>>();
    k.residual = j.at("residual").get<double>();
    k.gradient_residual = j.at("gradient_residual").get<double>();
    k.samples_per_face = j.at("samples_per_face").get<int>();
    k.validation_samples = j.at("validation_samples").get<int>();
    k.condition = j.at("condition").get<double>();
    if (static_cast<int>(k.alpha.size()) != solid_harmonic_count(k.degree))
      fail(ErrorKind::schema, "alpha length does not match degree");
    return k;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::schema, std::string("kernel cache: ") + e.what());
  }
}

inline void write_kernel_cache(const KernelCoefficients& k, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot open " + path + " for writing");
  out << to_json(k).dump(1) << '\n';
  if (!out) fail(ErrorKind::io, "write failed: " + path);
}

inline KernelCoefficients read_kernel_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::missing_kernel_cache, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::schema, std::string("kernel cache: ") + e.what());
  }
  return kernel_coefficients_from_json(j);
}

}  // namespace scaffold
