#pragma once

// Generalized Sinkhorn solver: alternate the potential transform over
// columns and rows of the cost matrix, anchor the column potential at its
// first entry, and stop once the row potential moves less than the
// tolerance in sup norm. The optimal coupling is recovered from the
// conjugate derivative of the scaled dual slack.

#include <Eigen/Core>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fot/divergence.hpp"
#include "fot/errors.hpp"
#include "fot/measures.hpp"
#include "fot/parallel.hpp"
#include "fot/transform.hpp"
#include "fot/types.hpp"

namespace fot {

template <typename S>
struct Problem {
  DiscreteMeasure<S> source;  // mu
  DiscreteMeasure<S> target;  // nu
  CostMatrix<S> cost;         // k x l
  Divergence<S> divergence;
  S epsilon = S(1);
};

template <typename S>
Problem<S> make_problem(DiscreteMeasure<S> source, DiscreteMeasure<S> target,
                        const Divergence<S>& divergence, S epsilon,
                        CostId cost_id = CostId::half_squared_euclidean) {
  Problem<S> p;
  p.cost = build_cost(source, target, cost_id);
  p.source = std::move(source);
  p.target = std::move(target);
  p.divergence = divergence;
  p.epsilon = epsilon;
  return p;
}

template <typename S>
void validate_problem(const Problem<S>& p) {
  validate_measure(p.source);
  validate_measure(p.target);
  if (p.cost.values.rows() != p.source.size() ||
      p.cost.values.cols() != p.target.size())
    throw std::invalid_argument("problem: cost matrix shape mismatch");
  if (!p.cost.values.allFinite())
    throw std::invalid_argument("problem: cost matrix must be finite");
  if (!(p.epsilon > S(0)) || !std::isfinite(p.epsilon))
    throw std::invalid_argument("problem: epsilon must be positive");
  if (p.divergence.requires_double && std::is_same_v<S, float>)
    throw PrecisionError(std::string(p.divergence.name) +
                         " requires double precision");
}

template <typename S>
struct Potentials {
  Eigen::VectorX<S> f;  // over source support
  Eigen::VectorX<S> g;  // over target support, zero at the anchor
  Index anchor_index = 0;
};

template <typename S>
struct Coupling {
  Eigen::MatrixX<S> plan;  // k x l, nonnegative
  S row_marginal_error = S(0);
  S col_marginal_error = S(0);
  S positive_fraction = S(0);
};

template <typename S>
struct SolveOptions {
  S tolerance = S(1e-6);
  int max_iterations = 50000;
  NewtonOptions<S> newton;
  bool record_dual_trace = true;
  unsigned threads = 0;  // 0: hardware concurrency
  S marginal_warn_threshold = S(1e-3);
  std::optional<Eigen::VectorX<S>> initial_f;  // warm start, defaults to zero
};

template <typename S>
struct SolveReport {
  int iterations = 0;
  bool converged = false;
  std::vector<S> dual_trace;  // dual objective after each full iteration
  S dual_value = S(0);
  S primal_value = S(0);
  // Primal with densities floored away from zero, for diagnostics when an
  // underflowed zero density drives the true primal to +infinity.
  S primal_value_floored = S(0);
  S duality_gap = S(0);
  S row_marginal_error = S(0);
  S col_marginal_error = S(0);
  S positive_fraction = S(0);
  bool marginal_flag = false;
  bool primal_flagged = false;
  double wall_time_seconds = 0;
};

template <typename S>
struct SolveResult {
  Potentials<S> potentials;
  Coupling<S> coupling;
  SolveReport<S> report;
};

// Dual objective for a pair of potentials; -infinity when the pair is
// infeasible (some slack above the slope at infinity).
template <typename S>
S dual_value(const Problem<S>& p, const Eigen::VectorX<S>& f,
             const Eigen::VectorX<S>& g) {
  const S inv_eps = S(1) / p.epsilon;
  const S slope = p.divergence.slope_at_infinity;
  const auto& C = p.cost.values;
  const auto& mw = p.source.weights;
  const auto& nw = p.target.weights;
  return dispatch_divergence<S>(p.divergence.id, [&](auto tag) -> S {
    using Tag = decltype(tag);
    S acc = 0;
    for (Index j = 0; j < C.cols(); ++j) {
      S col = 0;
      for (Index i = 0; i < C.rows(); ++i) {
        const S t = (f[i] + g[j] - C(i, j)) * inv_eps;
        if (t > slope) return -infinity<S>();
        col += mw[i] * Tag::conjugate(t);
      }
      acc += nw[j] * col;
    }
    return mw.dot(f) + nw.dot(g) - p.epsilon * acc;
  });
}

template <typename S>
S dual_value(const Problem<S>& p, const Potentials<S>& potentials) {
  return dual_value(p, potentials.f, potentials.g);
}

namespace detail {

template <typename S>
S primal_value_impl(const Problem<S>& p, const Eigen::MatrixX<S>& plan,
                    S density_floor) {
  const auto& C = p.cost.values;
  const auto& mw = p.source.weights;
  const auto& nw = p.target.weights;
  S transport = 0;
  S penalty = 0;
  for (Index j = 0; j < C.cols(); ++j)
    for (Index i = 0; i < C.rows(); ++i) {
      const S mass = plan(i, j);
      transport += C(i, j) * mass;
      const S ref = mw[i] * nw[j];
      S density = mass / ref;
      if (density < density_floor) density = density_floor;
      const S value = primal_generator_value(p.divergence, density);
      if (value == infinity<S>()) return infinity<S>();
      penalty += ref * value;
    }
  return transport + p.epsilon * penalty;
}

}  // namespace detail

// Transport cost plus the scaled divergence of the coupling from the
// product measure; +infinity when a zero density meets a generator that
// diverges at zero.
template <typename S>
S primal_value(const Problem<S>& p, const Coupling<S>& coupling) {
  return detail::primal_value_impl(p, coupling.plan, S(0));
}

template <typename S>
S sparsity(const Coupling<S>& coupling) {
  return S((coupling.plan.array() > S(0)).count()) / S(coupling.plan.size());
}

namespace detail {

template <typename S>
Coupling<S> recover_coupling(const Problem<S>& p, const Eigen::VectorX<S>& f,
                             const Eigen::VectorX<S>& g) {
  const S inv_eps = S(1) / p.epsilon;
  const auto& C = p.cost.values;
  Coupling<S> coupling;
  coupling.plan.resize(C.rows(), C.cols());
  dispatch_divergence<S>(p.divergence.id, [&](auto tag) {
    using Tag = decltype(tag);
    for (Index j = 0; j < C.cols(); ++j)
      for (Index i = 0; i < C.rows(); ++i)
        coupling.plan(i, j) =
            Tag::conjugate_prime((f[i] + g[j] - C(i, j)) * inv_eps) *
            p.source.weights[i] * p.target.weights[j];
  });
  coupling.row_marginal_error =
      (coupling.plan.rowwise().sum() - p.source.weights).template lpNorm<1>();
  coupling.col_marginal_error =
      (coupling.plan.colwise().sum().transpose() - p.target.weights)
          .template lpNorm<1>();
  coupling.positive_fraction = sparsity(coupling);
  return coupling;
}

}  // namespace detail

// Runs the alternating transform loop from f = 0 (or a warm start).
// Newton failures propagate with iteration context; exhausting
// max_iterations is reported, not thrown.
template <typename S>
SolveResult<S> solve(const Problem<S>& p, const SolveOptions<S>& opts = {}) {
  validate_problem(p);
  if (!(opts.tolerance > S(0)))
    throw std::invalid_argument("solve: tolerance must be positive");

  const auto t_start = std::chrono::steady_clock::now();
  const Index k = p.source.size();
  const Index l = p.target.size();
  const auto& C = p.cost.values;
  const S eps = p.epsilon;

  Eigen::VectorX<S> f;
  if (opts.initial_f) {
    if (opts.initial_f->size() != k)
      throw std::invalid_argument("solve: warm-start potential has wrong size");
    f = *opts.initial_f;
  } else {
    f = Eigen::VectorX<S>::Zero(k);
  }
  Eigen::VectorX<S> g = Eigen::VectorX<S>::Zero(l);
  Eigen::VectorX<S> f_prev(k);

  SolveResult<S> result;
  SolveReport<S>& report = result.report;

  auto transform_into = [&](Index count, const Eigen::VectorX<S>& fixed,
                            const Eigen::VectorX<S>& weights, bool columns,
                            Eigen::VectorX<S>& out, int iteration) {
    parallel_for(count, opts.threads, [&](Index idx) {
      thread_local Eigen::VectorX<S> h;
      if (columns)
        h = (fixed - C.col(idx)) / eps;
      else
        h = (fixed.transpose() - C.row(idx)).transpose() / eps;
      try {
        out[idx] =
            -eps * solve_transform<S>(h, weights, p.divergence, opts.newton).value;
      } catch (const NonconvergenceError& e) {
        throw NonconvergenceError(
            std::string(e.what()) + " [sinkhorn iteration " +
                std::to_string(iteration) + ", " +
                (columns ? "column " : "row ") + std::to_string(idx) + "]",
            e.last_value, e.last_residual, e.iterations);
      }
    });
  };

  int iteration = 0;
  while (iteration < opts.max_iterations) {
    ++iteration;
    f_prev = f;
    transform_into(l, f, p.source.weights, true, g, iteration);
    g.array() -= g[0];
    transform_into(k, g, p.target.weights, false, f, iteration);
    if (!f.allFinite() || !g.allFinite())
      throw NumericalError(
          "solve: non-finite potentials at iteration " +
          std::to_string(iteration) + " for " + std::string(p.divergence.name) +
          " (" + precision_name<S>() + " precision)");
    if (opts.record_dual_trace)
      report.dual_trace.push_back(dual_value(p, f, g));
    if ((f - f_prev).template lpNorm<Eigen::Infinity>() < opts.tolerance) {
      report.converged = true;
      break;
    }
  }
  report.iterations = iteration;

  result.potentials = Potentials<S>{std::move(f), std::move(g), 0};
  result.coupling =
      detail::recover_coupling(p, result.potentials.f, result.potentials.g);

  report.dual_value = dual_value(p, result.potentials);
  report.primal_value = primal_value(p, result.coupling);
  report.primal_flagged = !std::isfinite(report.primal_value);
  report.primal_value_floored =
      report.primal_flagged
          ? detail::primal_value_impl(p, result.coupling.plan, S(1e-300))
          : report.primal_value;
  report.duality_gap = report.primal_value - report.dual_value;
  report.row_marginal_error = result.coupling.row_marginal_error;
  report.col_marginal_error = result.coupling.col_marginal_error;
  report.positive_fraction = result.coupling.positive_fraction;
  report.marginal_flag =
      report.row_marginal_error > opts.marginal_warn_threshold ||
      report.col_marginal_error > opts.marginal_warn_threshold;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return result;
}

// Detached transport loss: the plan is held constant, so the gradient in a
// source point is the plan-weighted sum of cost gradients along its row.
template <typename S>
struct LossGradient {
  S loss = S(0);
  PointMatrix<S> source_gradient;  // k x d
  PointMatrix<S> target_gradient;  // l x d
};

template <typename S>
LossGradient<S> loss_and_gradient(const Problem<S>& p,
                                  const Coupling<S>& coupling) {
  const auto& plan = coupling.plan;
  const Index k = p.source.size();
  const Index l = p.target.size();
  const Index d = p.source.dim();
  const CostModel<S> model = p.cost.model();

  LossGradient<S> out;
  out.loss = (p.cost.values.array() * plan.array()).sum();
  out.source_gradient = PointMatrix<S>::Zero(k, d);
  out.target_gradient = PointMatrix<S>::Zero(l, d);
  std::vector<S> grad(d);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < l; ++j) {
      const S mass = plan(i, j);
      if (mass == S(0)) continue;
      model.grad_x(p.source.point(i), p.target.point(j), grad);
      for (Index m = 0; m < d; ++m) out.source_gradient(i, m) += mass * grad[m];
      // Registered costs are symmetric, so the target-side gradient is the
      // cost gradient with the arguments swapped.
      model.grad_x(p.target.point(j), p.source.point(i), grad);
      for (Index m = 0; m < d; ++m) out.target_gradient(j, m) += mass * grad[m];
    }
  return out;
}

// ---------------------------------------------------------------------------
// Epsilon tuning: bisection on log10(epsilon) against the iteration count,
// which in practice decreases as epsilon grows.

template <typename S>
struct TuneProbe {
  S epsilon = S(0);
  int iterations = 0;
  bool converged = false;
};

template <typename S>
struct TuneResult {
  S epsilon = S(0);
  int iterations = 0;
  bool warning = false;
  std::string note;
  S lower_bound = S(0);
  S upper_bound = S(0);
  std::vector<TuneProbe<S>> probes;
};

template <typename S>
struct TuneOptions {
  S lower_bound = S(1e-9);
  S upper_bound = S(1);
  int max_probes = 40;
  SolveOptions<S> solve;
};

template <typename S>
TuneResult<S> tune_epsilon(Problem<S> p, int target_iterations, S tolerance,
                           TuneOptions<S> opts = {}) {
  if (target_iterations < 2)
    throw std::invalid_argument("tune_epsilon: target must be >= 2");
  opts.solve.tolerance = tolerance;
  opts.solve.record_dual_trace = false;

  TuneResult<S> result;
  result.lower_bound = opts.lower_bound;
  result.upper_bound = opts.upper_bound;

  auto probe = [&](S eps) -> TuneProbe<S> {
    p.epsilon = eps;
    const auto solved = solve(p, opts.solve);
    TuneProbe<S> pr{eps, solved.report.iterations, solved.report.converged};
    result.probes.push_back(pr);
    return pr;
  };
  auto in_window = [&](int iters) {
    return iters >= target_iterations &&
           S(iters) < S(1.2) * S(target_iterations);
  };
  auto finish = [&](const TuneProbe<S>& pr, bool warning,
                    const std::string& note) {
    result.epsilon = pr.epsilon;
    result.iterations = pr.iterations;
    result.warning = warning;
    result.note = note;
    return result;
  };

  TuneProbe<S> hi = probe(opts.upper_bound);
  if (in_window(hi.iterations)) return finish(hi, false, "");
  if (hi.iterations >= target_iterations)
    return finish(hi, true,
                  "target is below what the upper bound achieves; clamped");

  // Walk down by decades until the count reaches the target.
  TuneProbe<S> lo = hi;
  while (lo.iterations < target_iterations) {
    const S next = lo.epsilon / S(10);
    if (next < opts.lower_bound)
      return finish(lo, true, "target not reached above the lower bound");
    try {
      lo = probe(next);
    } catch (const NonconvergenceError&) {
      return finish(lo, true,
                    "inner Newton fails below epsilon = " +
                        std::to_string(double(lo.epsilon)));
    }
    if (in_window(lo.iterations)) return finish(lo, false, "");
  }

  // Bisect in log space; counts are integer-valued, so the window can be
  // skipped entirely, in which case return the closest probe.
  while (int(result.probes.size()) < opts.max_probes &&
         hi.epsilon / lo.epsilon > S(1.01)) {
    const S mid = std::sqrt(lo.epsilon * hi.epsilon);
    TuneProbe<S> pr;
    try {
      pr = probe(mid);
    } catch (const NonconvergenceError&) {
      lo.epsilon = mid;  // treat as unusable from below
      continue;
    }
    if (in_window(pr.iterations)) return finish(pr, false, "");
    if (pr.iterations < target_iterations)
      hi = pr;
    else
      lo = pr;
  }

  TuneProbe<S> best = result.probes.front();
  for (const auto& pr : result.probes)
    if (std::abs(pr.iterations - target_iterations) <
        std::abs(best.iterations - target_iterations))
      best = pr;
  return finish(best, true,
                "no epsilon landed in the target window; returning closest");
}

}  // namespace fot
