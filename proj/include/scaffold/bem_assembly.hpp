#pragma once

#include <array>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "core.hpp"
#include "periodic_kernel.hpp"
#include "quadrature.hpp"
#include "surface_geometry.hpp"
#include "trace_space.hpp"

namespace scaffold {

/// Quadrature settings of the Galerkin assembly. The kernel is always split
/// into the free-space part 1/(4 pi |x-y|), integrated with regularizing rules
/// on touching element pairs, the 26 outer images (tensor Gauss with an order
/// chosen from their distance) and the polynomial part |z|^2/6 + correction,
/// which is separable and integrated with `polynomial_order` points per
/// direction on every element.
struct QuadratureScheme {
  int coincident_order = 5;
  int edge_order = 5;
  int vertex_order = 5;
  /// (minimum distance ratio, Gauss order) in decreasing ratio; the ratio is
  /// centre distance over the larger element radius
  std::vector<std::pair<double, int>> far_orders{{12.0, 4}, {6.0, 5}, {4.0, 6}, {2.5, 7}};
  /// same for the 26 outer images, with the distance to the nearest image;
  /// these dominate the cost and are smooth on every pair
  std::vector<std::pair<double, int>> image_orders{{12.0, 3}, {6.0, 4}, {4.0, 5}, {2.5, 7}};
  /// order below the last ratio of either table
  int near_order = 10;
  int polynomial_order = 4;
  /// adds this many points to every tensor Gauss order (convergence checks)
  int order_increment = 0;

  int order_for_ratio(double rho) const { return lookup(far_orders, rho); }
  int image_order_for_ratio(double rho) const { return lookup(image_orders, rho); }

 private:
  int lookup(const std::vector<std::pair<double, int>>& table, double rho) const {
    for (const auto& [r, q] : table)
      if (rho >= r) return q + order_increment;
    return near_order + order_increment;
  }
};

/// Geometric relation of two elements, from their shared corner ids.
struct PairClass {
  PairRelation relation = PairRelation::separated;
  // canonical-to-local affine maps: local = o + s*e1 + t*e2
  std::array<double, 2> oa{}, e1a{}, e2a{}, ob{}, e1b{}, e2b{};
};

namespace detail {

inline std::array<double, 2> corner_uv(int c) { return {static_cast<double>(c & 1), static_cast<double>(c >> 1)}; }

// Local frame with origin at corner P, first axis towards Q (adjacent to P) or,
// when Q < 0, towards either adjacent corner.
inline void corner_frame(int p, int q, std::array<double, 2>& o, std::array<double, 2>& e1,
                         std::array<double, 2>& e2) {
  o = corner_uv(p);
  const int qa = q >= 0 ? q : (p ^ 1);
  const int diff = p ^ qa;
  if (diff != 1 && diff != 2) fail(ErrorKind::topology, "shared corners are not adjacent");
  const int r = p ^ (3 ^ diff);
  const auto uq = corner_uv(qa), ur = corner_uv(r);
  e1 = {uq[0] - o[0], uq[1] - o[1]};
  e2 = {ur[0] - o[0], ur[1] - o[1]};
}

}  // namespace detail

inline PairClass classify_pair(const PolynomialSurface& s, int a, int b) {
  PairClass pc;
  if (a == b) {
    pc.relation = PairRelation::coincident;
    pc.e1a = pc.e1b = {1.0, 0.0};
    pc.e2a = pc.e2b = {0.0, 1.0};
    return pc;
  }
  const auto ca = s.corner_ids(a), cb = s.corner_ids(b);
  std::array<std::pair<int, int>, 4> shared{};
  int ns = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (ca[i] == cb[j]) shared[ns++] = {i, j};
  if (ns == 0) return pc;
  if (ns == 1) {
    pc.relation = PairRelation::vertex;
    detail::corner_frame(shared[0].first, -1, pc.oa, pc.e1a, pc.e2a);
    detail::corner_frame(shared[0].second, -1, pc.ob, pc.e1b, pc.e2b);
    return pc;
  }
  if (ns == 2) {
    pc.relation = PairRelation::edge;
    detail::corner_frame(shared[0].first, shared[1].first, pc.oa, pc.e1a, pc.e2a);
    detail::corner_frame(shared[0].second, shared[1].second, pc.ob, pc.e1b, pc.e2b);
    return pc;
  }
  fail(ErrorKind::topology, "elements " + std::to_string(a) + " and " + std::to_string(b) +
                                " share " + std::to_string(ns) + " corners");
}

/// Galerkin matrices of one cell problem. V, K and the mass use the patchwise
/// numbering internally; the reduced matrices below are what the solver uses.
struct OperatorSet {
  TraceSpace dirichlet;
  TraceSpace neumann;
  /// single layer, Neumann test x Neumann trial (symmetric)
  Eigen::MatrixXd V;
  /// single layer, Dirichlet test x Neumann trial
  Eigen::MatrixXd S;
  /// double layer, Dirichlet test x Dirichlet trial
  Eigen::MatrixXd K;
  /// mass, Dirichlet x Dirichlet
  Eigen::MatrixXd M_D;
  /// mass, Dirichlet test x Neumann trial
  Eigen::MatrixXd M_mix;
  /// mass, Neumann x Neumann
  Eigen::MatrixXd M_N;
  /// b(k, i) = int n_i phi_k over Neumann resp. Dirichlet functions
  Eigen::MatrixX3d b_N;
  Eigen::MatrixX3d b_D;
};

inline int assembly_threads() {
#ifdef _OPENMP
  if (const char* env = std::getenv("SCAFFOLD_NUM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace detail {

// Gauss data of one element at one tensor order.
struct ElementRule {
  int q = 0;
  std::vector<Vec3> x, n;
  std::vector<double> w;  // Gauss weight times surface measure
  Eigen::MatrixXd phi;    // points x local functions
};

class AssemblyContext {
 public:
  AssemblyContext(const PolynomialSurface& s, const TraceSpace& sp, const PeriodicKernel& k,
                  const QuadratureScheme& qs)
      : s_(s), sp_(sp), k_(k), qs_(qs), ne_(s.element_count()), nl_(sp.local_count()) {
    centre_.resize(ne_);
    radius_.resize(ne_);
    for (int e = 0; e < ne_; ++e) {
      centre_[e] = s.evaluate(e, 0.5, 0.5).x;
      double r = 0.0;
      for (double u : {0.0, 0.5, 1.0})
        for (double v : {0.0, 0.5, 1.0}) r = std::max(r, (s.evaluate(e, u, v).x - centre_[e]).norm());
      radius_[e] = r;
    }
    rules_.resize(kMaxGaussOrder + 1);
  }

  const ElementRule& rule(int e, int q) {
    if (rules_[q].empty()) {
      rules_[q].resize(ne_);
      for (int f = 0; f < ne_; ++f) rules_[q][f] = make_rule(f, q);
    }
    return rules_[q][e];
  }

  void prepare(int q) { (void)rule(0, q); }

  int free_order(int a, int b) const {
    const double r = std::max(radius_[a], radius_[b]);
    return qs_.order_for_ratio((centre_[a] - centre_[b]).norm() / r);
  }

  int image_order(int a, int b) const {
    const double r = std::max(radius_[a], radius_[b]);
    const Vec3 d = centre_[a] - centre_[b];
    double best = 1e300;
    for (int i = -1; i <= 1; ++i)
      for (int j = -1; j <= 1; ++j)
        for (int l = -1; l <= 1; ++l)
          if (i != 0 || j != 0 || l != 0) best = std::min(best, (d - Vec3(i, j, l)).norm());
    return qs_.image_order_for_ratio(best / r);
  }

  ElementRule make_rule(int e, int q) const {
    const GaussRule& g = gauss_legendre(q);
    ElementRule r;
    r.q = q;
    r.x.resize(q * q);
    r.n.resize(q * q);
    r.w.resize(q * q);
    r.phi.resize(q * q, nl_);
    const auto [k1, k2] = s_.element_index(e);
    std::vector<double> val(nl_);
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < q; ++i) {
        const int p = i + q * j;
        const SurfaceSample smp = s_.sample(e, g.points[i], g.points[j]);
        r.x[p] = smp.x;
        r.n[p] = smp.n;
        r.w[p] = g.weights[i] * g.weights[j] * smp.g;
        sp_.evaluate(k1, k2, g.points[i], g.points[j], val.data());
        for (int l = 0; l < nl_; ++l) r.phi(p, l) = val[l];
      }
    return r;
  }

  // Tensor Gauss contribution of the free-space part and/or the 26 outer
  // images. Vab, Kab: test a, trial b; Kba: test b, trial a.
  void tensor_pair(int a, int b, int q, bool free_part, bool images, Eigen::MatrixXd& Vab,
                   Eigen::MatrixXd& Kab, Eigen::MatrixXd& Kba) {
    const ElementRule& ra = rule(a, q);
    const ElementRule& rb = rule(b, q);
    const int np = q * q;
    Eigen::MatrixXd kv(np, np), kab(np, np), kba(np, np);
    constexpr double c = 1.0 / (4.0 * kPi);
    for (int j = 0; j < np; ++j) {
      const Vec3& y = rb.x[j];
      const Vec3& ny = rb.n[j];
      for (int i = 0; i < np; ++i) {
        const Vec3 z = ra.x[i] - y;
        double v = 0.0;
        Vec3 gr = Vec3::Zero();  // sum of z_m / |z_m|^3
        if (free_part) {
          const double r2 = z.squaredNorm();
          const double ir = 1.0 / std::sqrt(r2);
          v += ir;
          gr += (ir * ir * ir) * z;
        }
        if (images) {
          for (int m0 = -1; m0 <= 1; ++m0)
            for (int m1 = -1; m1 <= 1; ++m1)
              for (int m2 = -1; m2 <= 1; ++m2) {
                if (m0 == 0 && m1 == 0 && m2 == 0) continue;
                const Vec3 zm(z[0] - m0, z[1] - m1, z[2] - m2);
                const double ir = 1.0 / zm.norm();
                v += ir;
                gr += (ir * ir * ir) * zm;
              }
        }
        const double wij = ra.w[i] * rb.w[j] * c;
        kv(i, j) = wij * v;
        kab(i, j) = wij * gr.dot(ny);
        kba(i, j) = -wij * gr.dot(ra.n[i]);
      }
    }
    Vab.noalias() += ra.phi.transpose() * kv * rb.phi;
    Kab.noalias() += ra.phi.transpose() * kab * rb.phi;
    if (a != b) Kba.noalias() += rb.phi.transpose() * kba.transpose() * ra.phi;
  }

  // Regularized free-space contribution of a touching pair.
  void singular_pair(int a, int b, const PairClass& pc, Eigen::MatrixXd& Vab, Eigen::MatrixXd& Kab,
                     Eigen::MatrixXd& Kba) const {
    const int q = pc.relation == PairRelation::coincident ? qs_.coincident_order
                  : pc.relation == PairRelation::edge     ? qs_.edge_order
                                                          : qs_.vertex_order;
    const std::vector<PairPoint>& rule = singular_pair_rule(pc.relation, q);
    const auto [a1, a2] = s_.element_index(a);
    const auto [b1, b2] = s_.element_index(b);
    std::vector<double> pa(nl_), pb(nl_);
    constexpr double c = 1.0 / (4.0 * kPi);
    for (const PairPoint& pp : rule) {
      const double ua = pc.oa[0] + pp.x1 * pc.e1a[0] + pp.x2 * pc.e2a[0];
      const double va = pc.oa[1] + pp.x1 * pc.e1a[1] + pp.x2 * pc.e2a[1];
      const double ub = pc.ob[0] + pp.y1 * pc.e1b[0] + pp.y2 * pc.e2b[0];
      const double vb = pc.ob[1] + pp.y1 * pc.e1b[1] + pp.y2 * pc.e2b[1];
      const SurfaceSample sx = s_.sample(a, ua, va);
      const SurfaceSample sy = s_.sample(b, ub, vb);
      sp_.evaluate(a1, a2, ua, va, pa.data());
      sp_.evaluate(b1, b2, ub, vb, pb.data());
      const Vec3 z = sx.x - sy.x;
      const double ir = 1.0 / z.norm();
      const double w = pp.w * sx.g * sy.g * c;
      const double kv = w * ir;
      const double ir3 = ir * ir * ir;
      const double kab = w * ir3 * z.dot(sy.n);
      const double kba = -w * ir3 * z.dot(sx.n);
      for (int j = 0; j < nl_; ++j)
        for (int i = 0; i < nl_; ++i) {
          const double pij = pa[i] * pb[j];
          Vab(i, j) += kv * pij;
          Kab(i, j) += kab * pij;
          if (a != b) Kba(j, i) += kba * pij;
        }
    }
  }

  const PolynomialSurface& s_;
  const TraceSpace& sp_;
  const PeriodicKernel& k_;
  const QuadratureScheme& qs_;
  int ne_, nl_;
  std::vector<Vec3> centre_;
  std::vector<double> radius_;
  std::vector<std::vector<ElementRule>> rules_;
};

// Coefficient matrix C with P(x - y) = sum_{a,b} C(a,b) x^a y^b.
inline Eigen::MatrixXd separable_coefficients(const MonomialBasis& mb, const std::vector<double>& beta) {
  const int m = mb.size();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(m, m);
  auto binom = [](int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  };
  for (int ia = 0; ia < m; ++ia)
    for (int ib = 0; ib < m; ++ib) {
      const auto& ea = mb.exponent(ia);
      const auto& eb = mb.exponent(ib);
      const int k = mb.index(ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]);
      if (k < 0 || beta[k] == 0.0) continue;
      double f = beta[k];
      for (int d = 0; d < 3; ++d) f *= binom(ea[d] + eb[d], eb[d]);
      if ((eb[0] + eb[1] + eb[2]) % 2 == 1) f = -f;
      c(ia, ib) = f;
    }
  return c;
}

// Sums rows (and columns) of patchwise matrices into the continuous numbering.
inline Eigen::MatrixXd reduce_rows(const Eigen::MatrixXd& a, const std::vector<int>& map, int n) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, a.cols());
  for (int i = 0; i < a.rows(); ++i) r.row(map[i]) += a.row(i);
  return r;
}

inline Eigen::MatrixXd reduce_cols(const Eigen::MatrixXd& a, const std::vector<int>& map, int n) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(a.rows(), n);
  for (int j = 0; j < a.cols(); ++j) r.col(map[j]) += a.col(j);
  return r;
}

}  // namespace detail

/// Mass matrix (patchwise numbering) and Neumann right-hand sides.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixX3d> assemble_mass_and_rhs(const PolynomialSurface& s,
                                                                          const TraceSpace& sp) {
  const int n = sp.patchwise_count();
  const int nl = sp.local_count();
  const int p = std::max(s.degree()[0], s.degree()[1]);
  const int q = std::max(sp.degree() + p + 1, (sp.degree() + 2 * p) / 2 + 1);
  const GaussRule& g = gauss_legendre(q);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixX3d b = Eigen::MatrixX3d::Zero(n, 3);
  std::vector<double> val(nl);
  std::vector<int> idx(nl);
  for (int e = 0; e < s.element_count(); ++e) {
    const auto [k1, k2] = s.element_index(e);
    for (int l = 0; l < nl; ++l) idx[l] = sp.patchwise_index(s, e, l);
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < q; ++i) {
        const SurfaceSample smp = s.sample(e, g.points[i], g.points[j]);
        sp.evaluate(k1, k2, g.points[i], g.points[j], val.data());
        const double w = g.weights[i] * g.weights[j] * smp.g;
        for (int a = 0; a < nl; ++a) {
          for (int c = 0; c < nl; ++c) m(idx[a], idx[c]) += w * val[a] * val[c];
          b.row(idx[a]) += (w * val[a]) * smp.n.transpose();
        }
      }
  }
  return {m, b};
}

/// Assembles all matrices of the cell problem for B-spline degree `degree`.
inline OperatorSet assemble_operators(const PolynomialSurface& s, int degree, const PeriodicKernel& kernel,
                                      const QuadratureScheme& qs = {}) {
  OperatorSet ops;
  auto spaces = build_spaces(s, degree);
  ops.dirichlet = std::move(spaces.first);
  ops.neumann = std::move(spaces.second);
  const TraceSpace& sp = ops.neumann;
  const int n = sp.patchwise_count();
  const int nl = sp.local_count();
  const int ne = s.element_count();

  detail::AssemblyContext ctx(s, sp, kernel, qs);
  // element rules are built up front so the pair loop only reads them
  std::vector<int> orders;
  for (const auto& fo : qs.far_orders) orders.push_back(fo.second + qs.order_increment);
  for (const auto& fo : qs.image_orders) orders.push_back(fo.second + qs.order_increment);
  orders.push_back(qs.near_order + qs.order_increment);
  for (int q : orders) ctx.prepare(q);

  const int nthreads = assembly_threads();
  std::vector<Eigen::MatrixXd> vpart(nthreads, Eigen::MatrixXd::Zero(n, n));
  std::vector<Eigen::MatrixXd> kpart(nthreads, Eigen::MatrixXd::Zero(n, n));
  std::vector<std::string> errors(nthreads);

#ifdef _OPENMP
#pragma omp parallel for schedule(static, 1) num_threads(nthreads)
#endif
  for (int a = 0; a < ne; ++a) {
#ifdef _OPENMP
    const int tid = omp_get_thread_num();
#else
    const int tid = 0;
#endif
    if (!errors[tid].empty()) continue;
    Eigen::MatrixXd vab(nl, nl), kab(nl, nl), kba(nl, nl);
    std::vector<int> ia(nl), ib(nl);
    for (int l = 0; l < nl; ++l) ia[l] = sp.patchwise_index(s, a, l);
    try {
      for (int b = a; b < ne; ++b) {
        vab.setZero();
        kab.setZero();
        kba.setZero();
        const PairClass pc = classify_pair(s, a, b);
        const int qi = ctx.image_order(a, b);
        if (pc.relation == PairRelation::separated) {
          const int qf = ctx.free_order(a, b);
          if (qf == qi) {
            ctx.tensor_pair(a, b, qf, true, true, vab, kab, kba);
          } else {
            ctx.tensor_pair(a, b, qf, true, false, vab, kab, kba);
            ctx.tensor_pair(a, b, qi, false, true, vab, kab, kba);
          }
        } else {
          ctx.singular_pair(a, b, pc, vab, kab, kba);
          ctx.tensor_pair(a, b, qi, false, true, vab, kab, kba);
        }
        if (!vab.allFinite() || !kab.allFinite() || !kba.allFinite())
          fail(ErrorKind::assembly, "non-finite entry for element pair (" + std::to_string(a) + ", " +
                                        std::to_string(b) + ")");
        for (int l = 0; l < nl; ++l) ib[l] = sp.patchwise_index(s, b, l);
        Eigen::MatrixXd& vm = vpart[tid];
        Eigen::MatrixXd& km = kpart[tid];
        for (int j = 0; j < nl; ++j)
          for (int i = 0; i < nl; ++i) {
            vm(ia[i], ib[j]) += vab(i, j);
            km(ia[i], ib[j]) += kab(i, j);
            if (a != b) {
              vm(ib[j], ia[i]) += vab(i, j);
              km(ib[j], ia[i]) += kba(j, i);
            }
          }
      }
    } catch (const std::exception& e) {
      errors[tid] = e.what();
    }
  }
  for (const std::string& e : errors)
    if (!e.empty()) fail(ErrorKind::assembly, e);
  Eigen::MatrixXd v = std::move(vpart[0]);
  Eigen::MatrixXd k = std::move(kpart[0]);
  for (int t = 1; t < nthreads; ++t) {
    v += vpart[t];
    k += kpart[t];
  }
  vpart.clear();
  kpart.clear();

  // separable polynomial part
  {
    const MonomialBasis& mb = kernel.monomials();
    const int nm = mb.size();
    const Eigen::MatrixXd c = detail::separable_coefficients(mb, kernel.polynomial());
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, nm), y = Eigen::MatrixXd::Zero(n, nm);
    const int q = qs.polynomial_order + qs.order_increment;
    std::vector<double> mono(nm), dmono(nm);
    for (int e = 0; e < ne; ++e) {
      const detail::ElementRule r = ctx.make_rule(e, q);
      for (int p = 0; p < q * q; ++p) {
        mb.evaluate(r.x[p], mono.data());
        mb.evaluate_directional(r.x[p], r.n[p], dmono.data());
        for (int l = 0; l < nl; ++l) {
          const int gi = sp.patchwise_index(s, e, l);
          const double w = r.w[p] * r.phi(p, l);
          for (int mi = 0; mi < nm; ++mi) {
            x(gi, mi) += w * mono[mi];
            y(gi, mi) += w * dmono[mi];
          }
        }
      }
    }
    const Eigen::MatrixXd xc = x * c;
    v.noalias() += xc * x.transpose();
    k.noalias() += xc * y.transpose();
  }
  if (!v.allFinite() || !k.allFinite()) fail(ErrorKind::assembly, "non-finite polynomial contribution");

  auto [m, b] = assemble_mass_and_rhs(s, sp);
  const std::vector<int>& map = ops.dirichlet.dof_map();
  const int nd = ops.dirichlet.dof_count();
  ops.S = detail::reduce_rows(v, map, nd);
  ops.K = detail::reduce_cols(detail::reduce_rows(k, map, nd), map, nd);
  ops.M_mix = detail::reduce_rows(m, map, nd);
  ops.M_D = detail::reduce_cols(ops.M_mix, map, nd);
  ops.b_D = detail::reduce_rows(b, map, nd);
  ops.V = std::move(v);
  ops.M_N = std::move(m);
  ops.b_N = std::move(b);
  return ops;
}

}  // namespace scaffold
