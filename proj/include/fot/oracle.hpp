#pragma once

// Brute-force references used by tests: closed-form KL transform, log-domain
// KL Sinkhorn, conjugate values by grid supremum, exact small-instance
// unregularized transport, and central finite differences. These share no
// numerical kernels with the solver beyond the divergence registry.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fot/divergence.hpp"
#include "fot/errors.hpp"
#include "fot/sinkhorn.hpp"
#include "fot/types.hpp"

namespace fot::oracle {

// log sum_i w_i e^{v_i}, max-shifted.
template <typename S>
S kl_transform_closed_form(const Eigen::Ref<const Eigen::VectorX<S>>& values,
                           const Eigen::Ref<const Eigen::VectorX<S>>& weights) {
  const S shift = values.maxCoeff();
  S acc = 0;
  for (Index i = 0; i < values.size(); ++i)
    acc += weights[i] * std::exp(values[i] - shift);
  return shift + std::log(acc);
}

// Log-domain Sinkhorn specialized to KL, with the same anchoring convention
// as the solver. Runs until the sup-norm change in f drops below tol or the
// iteration budget is spent.
template <typename S>
Potentials<S> kl_sinkhorn_logdomain(const Problem<S>& p, S tol,
                                    int max_iterations) {
  if (p.divergence.id != DivergenceId::kl)
    throw std::invalid_argument("kl_sinkhorn_logdomain: divergence must be kl");
  validate_problem(p);
  const auto& C = p.cost.values;
  const Index k = p.source.size();
  const Index l = p.target.size();
  const S eps = p.epsilon;

  Eigen::VectorX<S> f = Eigen::VectorX<S>::Zero(k);
  Eigen::VectorX<S> g = Eigen::VectorX<S>::Zero(l);
  Eigen::VectorX<S> f_prev(k), h(std::max(k, l));
  for (int it = 0; it < max_iterations; ++it) {
    f_prev = f;
    for (Index j = 0; j < l; ++j) {
      h.head(k) = (f - C.col(j)) / eps;
      g[j] = -eps * kl_transform_closed_form<S>(h.head(k), p.source.weights);
    }
    g.array() -= g[0];
    for (Index i = 0; i < k; ++i) {
      h.head(l) = (g.transpose() - C.row(i)).transpose() / eps;
      f[i] = -eps * kl_transform_closed_form<S>(h.head(l), p.target.weights);
    }
    if ((f - f_prev).template lpNorm<Eigen::Infinity>() < tol) break;
  }
  return Potentials<S>{std::move(f), std::move(g), 0};
}

// max over the grid of s*t - generator(s).
template <typename S>
S conjugate_grid_sup(const Divergence<S>& d, S t,
                     const Eigen::Ref<const Eigen::VectorX<S>>& s_grid) {
  S best = -infinity<S>();
  for (Index i = 0; i < s_grid.size(); ++i) {
    const S value = s_grid[i] * t - primal_generator_value(d, s_grid[i]);
    if (value > best) best = value;
  }
  return best;
}

// Uniform grid on [0, s_max] where s_max doubles until the objective stops
// increasing, then doubles once more.
template <typename S>
Eigen::VectorX<S> conjugate_grid(const Divergence<S>& d, S t,
                                 Index points = 100000) {
  auto objective = [&](S s) { return s * t - primal_generator_value(d, s); };
  S s = S(1);
  while (objective(S(2) * s) > objective(s) && s < S(1099511627776.0))  // 2^40
    s *= S(2);
  const S s_max = S(2) * s;
  Eigen::VectorX<S> grid(points);
  for (Index i = 0; i < points; ++i)
    grid[i] = s_max * S(i) / S(points - 1);
  return grid;
}

// Exact unregularized transport value for uniform marginals with k = l <= 6:
// minimum over permutations of the average assignment cost.
template <typename S>
S brute_force_ot(const Eigen::MatrixX<S>& cost) {
  const Index n = cost.rows();
  if (n != cost.cols())
    throw std::invalid_argument("brute_force_ot: cost must be square");
  if (n < 1 || n > 6)
    throw std::invalid_argument("brute_force_ot: supports 1 <= k = l <= 6");
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index(0));
  S best = infinity<S>();
  do {
    S total = 0;
    for (Index i = 0; i < n; ++i) total += cost(i, perm[i]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / S(n);
}

// Central finite differences of a scalar function of a vector.
template <typename S, typename Fn>
Eigen::VectorX<S> finite_difference_gradient(Fn&& fn,
                                             const Eigen::VectorX<S>& x,
                                             S step) {
  Eigen::VectorX<S> grad(x.size());
  Eigen::VectorX<S> probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const S upper = fn(probe);
    probe[i] = x[i] - step;
    const S lower = fn(probe);
    probe[i] = x[i];
    if (!std::isfinite(upper) || !std::isfinite(lower))
      throw NumericalError("finite_difference_gradient: non-finite evaluation");
    grad[i] = (upper - lower) / (S(2) * step);
  }
  return grad;
}

}  // namespace fot::oracle
