#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "bem_assembly.hpp"
#include "cell_solver.hpp"
#include "core.hpp"
#include "deformation_basis.hpp"
#include "homogenization.hpp"
#include "periodic_kernel.hpp"
#include "surface_geometry.hpp"

namespace scaffold {

struct OptimizationConfig {
  Mat3 target = Mat3::Identity();
  double j_tol = 1e-5;
  /// maximal number of gradient steps
  int max_iter = 25;
  /// every line search starts from t0 = initial_step / |g|
  double initial_step = 0.1;
  double shrink = 0.5;
  double expand = 2.0;
  int max_halvings = 10;
  int level = 3;
  int degree = 2;
  QuadratureScheme quadrature;
};

struct IterationRecord {
  int iteration = 0;
  Eigen::VectorXd y;
  double J = 0.0;
  Mat3 tensor = Mat3::Zero();
  double gradient_norm = 0.0;
  /// step that produced this iterate (0 for the initial one)
  double step = 0.0;
  int rejected = 0;
  double wall_ms = 0.0;
};

/// Result of the full pipeline at one parameter vector.
struct Evaluation {
  Eigen::VectorXd y;
  PolynomialSurface surface;
  CellSolution solution;
  Mat3 tensor = Mat3::Zero();
  double J = 0.0;
};

/// Quadratic line-search outcome.
struct LineSearchResult {
  double step = 0.0;
  double value = 0.0;
  int rejected = 0;
  int evaluations = 0;
};

/// Probes t0 and expand*t0, fits the quadratic through (0, J0) and both probes
/// and, when it is convex with minimizer in (0, expand*t0], probes the
/// minimizer too. The best probe is accepted if it decreases J; otherwise t0
/// shrinks, at most max_halvings times. `phi(t)` returns +inf for inadmissible
/// steps.
inline LineSearchResult line_search(const std::function<double(double)>& phi, double j0, double t0,
                                    double expand = 2.0, double shrink = 0.5, int max_halvings = 10) {
  if (!(t0 > 0.0)) fail(ErrorKind::parameter, "initial step must be positive");
  LineSearchResult r;
  for (int h = 0; h <= max_halvings; ++h) {
    const double t1 = t0, t2 = expand * t0;
    const double j1 = phi(t1), j2 = phi(t2);
    r.evaluations += 2;
    double best_t = t1, best_j = j1;
    if (j2 < best_j) {
      best_t = t2;
      best_j = j2;
    }
    if (std::isfinite(j1) && std::isfinite(j2)) {
      // q(t) = j0 + b t + c t^2 through the three samples
      const double c = ((j2 - j0) / t2 - (j1 - j0) / t1) / (t2 - t1);
      const double b = (j1 - j0) / t1 - c * t1;
      if (c > 0.0) {
        const double ts = -b / (2.0 * c);
        if (ts > 0.0 && ts <= t2 && ts != t1 && ts != t2) {
          const double js = phi(ts);
          ++r.evaluations;
          if (js < best_j) {
            best_t = ts;
            best_j = js;
          }
        }
      }
    }
    if (best_j < j0) {
      r.step = best_t;
      r.value = best_j;
      return r;
    }
    ++r.rejected;
    t0 *= shrink;
  }
  fail(ErrorKind::line_search_failure, "no decrease of the shape functional after " +
                                           std::to_string(max_halvings) + " step reductions");
}

/// Gradient descent on the deformation parameters.
class ShapeOptimizer {
 public:
  ShapeOptimizer(PolynomialSurface reference, DeformationBasis basis, PeriodicKernel kernel,
                 OptimizationConfig config)
      : ref_(std::move(reference)), basis_(std::move(basis)), kernel_(std::move(kernel)), cfg_(std::move(config)) {
    if (!(cfg_.j_tol > 0.0)) fail(ErrorKind::parameter, "stopping tolerance must be positive");
    if (cfg_.max_iter < 1) fail(ErrorKind::parameter, "at least one iteration is required");
    if ((cfg_.target - cfg_.target.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      fail(ErrorKind::parameter, "target tensor is not symmetric");
  }

  const PolynomialSurface& reference() const { return ref_; }
  const DeformationBasis& basis() const { return basis_; }
  const OptimizationConfig& config() const { return cfg_; }

  /// Full pipeline; step-rejected error for inadmissible y.
  Evaluation evaluate(const Eigen::VectorXd& y) const {
    Evaluation ev;
    ev.y = y;
    ev.surface = apply_displacement(ref_, basis_, y);
    const OperatorSet ops = assemble_operators(ev.surface, cfg_.degree, kernel_, cfg_.quadrature);
    ev.solution = solve_n2d(ops);
    ev.tensor = effective_tensor(ev.surface, ev.solution);
    ev.J = shape_functional(ev.tensor, cfg_.target);
    if (!std::isfinite(ev.J)) fail(ErrorKind::numerical_breakdown, "non-finite shape functional");
    return ev;
  }

  /// a'_ij[V_k] for every basis field at an evaluated state.
  std::vector<Mat3> derivatives(const Evaluation& ev) const {
    const ShapeDensity sd = shape_density(ev.surface, ev.solution);
    std::vector<Mat3> d;
    d.reserve(basis_.size());
    for (int k = 0; k < basis_.size(); ++k) d.push_back(shape_derivative_coefficient(ev.surface, sd, basis_.field(k)));
    return d;
  }

  Eigen::VectorXd gradient(const Evaluation& ev) const {
    return shape_gradient(ev.tensor, cfg_.target, derivatives(ev));
  }

  /// J at y, +inf if the deformed surface is inadmissible.
  double functional_or_inf(const Eigen::VectorXd& y, std::optional<Evaluation>* keep = nullptr) const {
    try {
      Evaluation ev = evaluate(y);
      const double j = ev.J;
      if (keep) *keep = std::move(ev);
      return j;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::step_rejected) return std::numeric_limits<double>::infinity();
      throw;
    }
  }

  /// Runs until J < j_tol or max_iter steps. `on_iterate` sees every
  /// accepted iterate, the initial one included.
  std::vector<IterationRecord> run(const std::function<void(const IterationRecord&, const Evaluation&)>& on_iterate = {}) {
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    auto ms = [&] { return std::chrono::duration<double, std::milli>(clock::now() - start).count(); };
    history_.clear();
    Eigen::VectorXd y = Eigen::VectorXd::Zero(basis_.size());
    Evaluation ev = evaluate(y);
    double step = 0.0;
    int rejected = 0;
    for (int it = 0;; ++it) {
      IterationRecord rec;
      rec.iteration = it;
      rec.y = y;
      rec.J = ev.J;
      rec.tensor = ev.tensor;
      rec.step = step;
      rec.rejected = rejected;
      const bool done = ev.J < cfg_.j_tol;
      Eigen::VectorXd g;
      if (!done) {
        g = gradient(ev);
        rec.gradient_norm = g.norm();
      }
      rec.wall_ms = ms();
      history_.push_back(rec);
      if (on_iterate) on_iterate(rec, ev);
      final_ = ev;
      if (done) {
        converged_ = true;
        return history_;
      }
      if (it >= cfg_.max_iter) {
        converged_ = false;
        return history_;
      }
      if (!(rec.gradient_norm > 0.0)) fail(ErrorKind::line_search_failure, "vanishing shape gradient above tolerance");
      const Eigen::VectorXd dir = -g;
      const double t0 = cfg_.initial_step / rec.gradient_norm;
      std::optional<Evaluation> best;
      double best_t = -1.0;
      auto phi = [&](double t) {
        std::optional<Evaluation> probe;
        const double j = functional_or_inf(y + t * dir, &probe);
        if (probe && (!best || j < best->J)) {
          best = std::move(probe);
          best_t = t;
        }
        return j;
      };
      const LineSearchResult ls = line_search(phi, ev.J, t0, cfg_.expand, cfg_.shrink, cfg_.max_halvings);
      // the accepted probe is the best finite one seen in the final round
      if (!best || best_t != ls.step) best.emplace(evaluate(y + ls.step * dir));
      y = y + ls.step * dir;
      ev = std::move(*best);
      step = ls.step;
      rejected = ls.rejected;
    }
  }

  const std::vector<IterationRecord>& history() const { return history_; }
  bool converged() const { return converged_; }
  const std::optional<Evaluation>& final_state() const { return final_; }

 private:
  PolynomialSurface ref_;
  DeformationBasis basis_;
  PeriodicKernel kernel_;
  OptimizationConfig cfg_;
  std::vector<IterationRecord> history_;
  std::optional<Evaluation> final_;
  bool converged_ = false;
};

}  // namespace scaffold
