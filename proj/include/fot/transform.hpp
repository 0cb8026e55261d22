#pragma once

// Scalar root solve behind each potential update: given values v, weights w
// summing to one and a divergence, find the offset t with
//
//   sum_i w_i * conjugate_prime(v_i - t) = 1,
//
// together with its gradient in v via the implicit function theorem. The
// residual is strictly decreasing in t, equals at most 1 at t = max(v), and
// blows up (or hits its supremum) as t drops to max(v) - slope_at_infinity.
// When no root exists the transform collapses to that lower bound.

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <type_traits>

#include "fot/divergence.hpp"
#include "fot/errors.hpp"
#include "fot/types.hpp"

namespace fot {

template <typename S>
constexpr S default_newton_tolerance() {
  return std::is_same_v<S, float> ? S(1e-6) : S(1e-10);
}

template <typename S>
constexpr const char* precision_name() {
  return std::is_same_v<S, float> ? "single" : "double";
}

template <typename S>
struct NewtonOptions {
  S tolerance = default_newton_tolerance<S>();
  int max_iterations = 100;
  // First iterate sits this fraction of (1 + |max v|) above the feasibility
  // bound when the slope at infinity is finite.
  S init_offset_scale = S(1e-3);
};

template <typename S>
struct TransformResult {
  S value = S(0);
  int newton_iterations = 0;
  bool collapsed = false;
  // |residual - 1| at the returned value; zero-filled when collapsed.
  S residual_error = S(0);
};

namespace detail {

// Summation switches to compensated form for long vectors to keep the
// marginal identity tight.
constexpr Index kCompensatedSumThreshold = 10000;

// Above this residual the Newton step is useless for exponential-type
// conjugates (it advances by O(1) per iteration), so the safeguard bisects.
constexpr double kResidualCeiling = 1e8;

template <typename Tag, typename S>
void residual_and_curvature(const S* v, const S* w, Index n, S t, S& residual,
                            S& curvature) {
  if (n >= kCompensatedSumThreshold) {
    S r = 0, rc = 0, k = 0, kc = 0;
    for (Index i = 0; i < n; ++i) {
      if (w[i] == S(0)) continue;
      const S arg = v[i] - t;
      S y = w[i] * Tag::conjugate_prime(arg) - rc;
      S s = r + y;
      rc = (s - r) - y;
      r = s;
      y = w[i] * Tag::conjugate_second(arg) - kc;
      s = k + y;
      kc = (s - k) - y;
      k = s;
    }
    residual = r;
    curvature = k;
    return;
  }
  S r = 0, k = 0;
  for (Index i = 0; i < n; ++i) {
    if (w[i] == S(0)) continue;
    const S arg = v[i] - t;
    r += w[i] * Tag::conjugate_prime(arg);
    k += w[i] * Tag::conjugate_second(arg);
  }
  residual = r;
  curvature = k;
}

template <typename S>
std::string transform_context(const Divergence<S>& d) {
  return std::string(d.name) + " (" + precision_name<S>() + " precision)";
}

}  // namespace detail

// Solves the weighted-conjugate-derivative equation by Newton iteration with
// a bisection safeguard; detects collapse onto the feasibility bound.
template <typename S>
TransformResult<S> solve_transform(const Eigen::Ref<const Eigen::VectorX<S>>& values,
                                   const Eigen::Ref<const Eigen::VectorX<S>>& weights,
                                   const Divergence<S>& d,
                                   const NewtonOptions<S>& opts = {}) {
  const Index n = values.size();
  if (n == 0 || weights.size() != n)
    throw std::invalid_argument(
        "solve_transform: values and weights must be nonempty and of equal "
        "length");
  if (!(opts.tolerance > S(0)))
    throw std::invalid_argument("solve_transform: tolerance must be positive");

  const S vmax = values.maxCoeff();
  if (!std::isfinite(vmax))
    throw NumericalError("solve_transform: non-finite values for " +
                         detail::transform_context(d));

  const S slope = d.slope_at_infinity;
  const bool finite_slope = std::isfinite(slope);
  const S bound = finite_slope ? vmax - slope : -infinity<S>();

  return dispatch_divergence<S>(d.id, [&](auto tag) -> TransformResult<S> {
    using Tag = decltype(tag);
    const S* v = values.data();
    const S* w = weights.data();

    auto eval = [&](S t, S& residual, S& curvature) {
      detail::residual_and_curvature<Tag>(v, w, n, t, residual, curvature);
    };

    // Bracket: residual > 1 below the root, < 1 above. The residual at
    // t = max(v) is at most 1 because every argument is <= 0 there.
    S lo = bound;
    S hi = vmax;
    bool above_seen = false;  // some t with residual >= 1 observed

    S t;
    if (finite_slope) {
      const S delta = opts.init_offset_scale * (S(1) + std::abs(vmax));
      t = bound + std::min(delta, S(0.5) * slope);
    } else {
      t = weights.dot(values);
    }

    S expand = S(1) + std::abs(t);
    S residual = 0, curvature = 0;
    int iterations = 0;

    for (; iterations < opts.max_iterations; ++iterations) {
      eval(t, residual, curvature);

      const bool finite_residual = std::isfinite(residual);
      if (finite_residual && std::abs(residual - S(1)) <= opts.tolerance &&
          (!std::isfinite(curvature) ||
           std::abs((residual - S(1)) / curvature) <= opts.tolerance)) {
        TransformResult<S> out;
        out.value = t;
        out.newton_iterations = iterations + 1;
        out.residual_error = std::abs(residual - S(1));
        return out;
      }

      if (!finite_residual || residual > S(1)) {
        lo = std::max(lo, t);
        above_seen = true;
      } else {
        hi = std::min(hi, t);
      }

      // Root trapped against the feasibility bound: probe just above it. A
      // residual still below 1 there means no root exists and the transform
      // collapses onto the bound.
      if (finite_slope && !above_seen && residual < S(1)) {
        const S probe_offset =
            std::pow(std::numeric_limits<S>::epsilon(), S(0.75)) *
            (S(1) + std::abs(bound));
        const S probe = bound + probe_offset;
        S probe_residual, probe_curvature;
        eval(probe, probe_residual, probe_curvature);
        if (std::isfinite(probe_residual) && probe_residual < S(1)) {
          TransformResult<S> out;
          out.value = bound;
          out.newton_iterations = iterations + 1;
          out.collapsed = true;
          return out;
        }
        lo = probe;
        above_seen = true;
      }

      S next = residual > S(detail::kResidualCeiling)
                   ? infinity<S>()
                   : t + (residual - S(1)) / curvature;
      if (!std::isfinite(next) || next <= lo || next >= hi) {
        if (std::isfinite(lo)) {
          next = lo + S(0.5) * (hi - lo);
        } else {
          next = t - expand;
          expand *= S(2);
        }
      }
      t = next;
    }

    throw NonconvergenceError(
        "solve_transform: Newton did not converge within " +
            std::to_string(opts.max_iterations) + " iterations for " +
            detail::transform_context(d) + "; last value " +
            std::to_string(double(t)) + ", last residual " +
            std::to_string(double(residual)),
        double(t), double(residual), iterations);
  });
}

// Gradient of the root in the values vector: weights times the conjugate
// curvature at the root, normalized to sum to one.
template <typename S>
Eigen::VectorX<S> transform_gradient(
    const Eigen::Ref<const Eigen::VectorX<S>>& values,
    const Eigen::Ref<const Eigen::VectorX<S>>& weights,
    const Divergence<S>& d, S root) {
  const Index n = values.size();
  if (n == 0 || weights.size() != n)
    throw std::invalid_argument(
        "transform_gradient: values and weights must be nonempty and of "
        "equal length");
  Eigen::VectorX<S> grad(n);
  dispatch_divergence<S>(d.id, [&](auto tag) {
    using Tag = decltype(tag);
    for (Index i = 0; i < n; ++i)
      grad[i] = weights[i] == S(0)
                    ? S(0)
                    : weights[i] * Tag::conjugate_second(values[i] - root);
  });
  const S total = grad.sum();
  if (!std::isfinite(total) || !(total > S(0)))
    throw NumericalError("transform_gradient: degenerate curvature for " +
                         detail::transform_context(d));
  grad /= total;
  return grad;
}

}  // namespace fot
