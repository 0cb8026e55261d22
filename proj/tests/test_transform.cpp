#include <cmath>
#include <doctest.h>
#include <random>

#include "fot/divergence.hpp"
#include "fot/oracle.hpp"
#include "fot/transform.hpp"

using namespace fot;
using Eigen::VectorXd;

namespace {

VectorXd random_weights(Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  VectorXd w(n);
  for (Index i = 0; i < n; ++i) w[i] = u(rng);
  w /= w.sum();
  return w;
}

VectorXd random_values(Index n, std::mt19937_64& rng, double scale = 3.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

}  // namespace

TEST_CASE("zero values have a zero root for every divergence") {
  std::mt19937_64 rng(1);
  for (const auto& d : all_divergences<double>()) {
    CAPTURE(d.name);
    const VectorXd v = VectorXd::Zero(5);
    const VectorXd w = random_weights(5, rng);
    const auto result = solve_transform<double>(v, w, d);
    CHECK(!result.collapsed);
    CHECK(std::abs(result.value) <= 1e-10);
  }
}

TEST_CASE("kl root matches the log-sum-exp closed form") {
  const auto kl = divergence_from_name<double>("kl");
  VectorXd v(2), w(2);
  v << 0.0, std::log(3.0);
  w << 0.5, 0.5;
  const auto result = solve_transform<double>(v, w, kl);
  // Closed form log(0.5 + 0.5 * 3) = log 2.
  CHECK(result.value == doctest::Approx(std::log(2.0)).epsilon(1e-10));

  std::mt19937_64 rng(2);
  std::uniform_int_distribution<Index> size(1, 200);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = size(rng);
    const VectorXd vals = random_values(n, rng);
    const VectorXd weights = random_weights(n, rng);
    const auto got = solve_transform<double>(vals, weights, kl);
    const double want = oracle::kl_transform_closed_form<double>(vals, weights);
    CHECK(std::abs(got.value - want) <= 1e-8);
  }
}

TEST_CASE("reverse kl root solves the quadratic by hand") {
  // residual 0.5/(1+t) + 0.5/(0.5+t) = 1 reduces to t^2 + 0.5 t - 0.25 = 0.
  const double expected = (-0.5 + std::sqrt(1.25)) / 2.0;
  CHECK(expected == doctest::Approx(0.3090169943749474).epsilon(1e-15));
  const auto rkl = divergence_from_name<double>("reverse_kl");
  VectorXd v(2), w(2);
  v << 0.0, 0.5;
  w << 0.5, 0.5;
  const auto result = solve_transform<double>(v, w, rkl);
  CHECK(!result.collapsed);
  CHECK(result.value == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("single atom root equals the single value") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (const auto& d : all_divergences<double>()) {
    CAPTURE(d.name);
    VectorXd v(1), w(1);
    v << u(rng);
    w << 1.0;
    const auto result = solve_transform<double>(v, w, d);
    CHECK(result.value == doctest::Approx(v[0]).epsilon(1e-9));
    const auto grad = transform_gradient<double>(v, w, d, result.value);
    CHECK(grad.size() == 1);
    CHECK(grad[0] == doctest::Approx(1.0));
  }
}

TEST_CASE("gradient closed forms") {
  const auto kl = divergence_from_name<double>("kl");
  VectorXd v(2), w(2);
  v << 0.0, std::log(3.0);
  w << 0.5, 0.5;
  const auto grad = transform_gradient<double>(v, w, kl, std::log(2.0));
  CHECK(grad[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(grad[1] == doctest::Approx(0.75).epsilon(1e-12));

  for (const auto& d : all_divergences<double>()) {
    CAPTURE(d.name);
    const VectorXd ones_v = VectorXd::Zero(2);
    VectorXd half(2);
    half << 0.5, 0.5;
    const auto g = transform_gradient<double>(ones_v, half, d, 0.0);
    CHECK(g[0] == doctest::Approx(0.5));
    CHECK(g[1] == doctest::Approx(0.5));
  }
}

TEST_CASE("gradient matches finite differences of the solve") {
  std::mt19937_64 rng(4);
  NewtonOptions<double> tight;
  tight.tolerance = 1e-12;
  for (const auto& d : all_divergences<double>()) {
    CAPTURE(d.name);
    for (int trial = 0; trial < 10; ++trial) {
      const Index n = 6;
      const VectorXd v = random_values(n, rng, 1.5);
      const VectorXd w = random_weights(n, rng);
      const auto result = solve_transform<double>(v, w, d, tight);
      REQUIRE(!result.collapsed);
      const auto grad = transform_gradient<double>(v, w, d, result.value);
      CHECK(grad.sum() == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(grad.minCoeff() >= 0.0);
      const auto fd = oracle::finite_difference_gradient<double>(
          [&](const VectorXd& x) {
            return solve_transform<double>(x, w, d, tight).value;
          },
          v, 1e-5);
      for (Index i = 0; i < n; ++i)
        CHECK(std::abs(grad[i] - fd[i]) / std::max(1.0, std::abs(grad[i])) <=
              1e-5);
    }
  }
}

TEST_CASE("shift equivariance, Lipschitz bound, and monotonicity") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> shift(-5.0, 5.0);
  for (const auto& d : all_divergences<double>()) {
    CAPTURE(d.name);
    for (int trial = 0; trial < 25; ++trial) {
      const Index n = 8;
      const VectorXd v = random_values(n, rng, 2.0);
      const VectorXd w = random_weights(n, rng);
      const double base = solve_transform<double>(v, w, d).value;

      const double a = shift(rng);
      const double shifted =
          solve_transform<double>((v.array() + a).matrix(), w, d).value;
      CHECK(std::abs(shifted - (base + a)) <= 1e-10 * (1.0 + std::abs(a)));

      const VectorXd v2 = random_values(n, rng, 2.0);
      const double other = solve_transform<double>(v2, w, d).value;
      const double dist = (v - v2).lpNorm<Eigen::Infinity>();
      CHECK(std::abs(base - other) <= dist + 1e-10);

      VectorXd bumped = v;
      std::uniform_real_distribution<double> bump(0.0, 0.5);
      for (Index i = 0; i < n; ++i) bumped[i] += bump(rng);
      const double larger = solve_transform<double>(bumped, w, d).value;
      CHECK(larger >= base - 1e-10);
    }
  }
}

TEST_CASE("collapse happens only through zero weight at the top") {
  const auto rkl = divergence_from_name<double>("reverse_kl");
  VectorXd v(2), w(2);
  v << 0.0, 10.0;
  w << 1.0, 0.0;
  const auto result = solve_transform<double>(v, w, rkl);
  CHECK(result.collapsed);
  CHECK(result.value == doctest::Approx(9.0));  // max(v) - slope

  const auto js = divergence_from_name<double>("jensen_shannon");
  VectorXd v2(2), w2(2);
  v2 << 0.0, 5.0;
  w2 << 1.0, 0.0;
  const auto r2 = solve_transform<double>(v2, w2, js);
  CHECK(r2.collapsed);
  CHECK(r2.value == doctest::Approx(5.0 - std::log(2.0)));

  // Strictly positive weights keep the residual unbounded at the feasibility
  // bound, so no collapse can occur.
  std::mt19937_64 rng(6);
  for (const auto& d : all_divergences<double>()) {
    if (!std::isfinite(d.slope_at_infinity)) continue;
    CAPTURE(d.name);
    for (int trial = 0; trial < 50; ++trial) {
      const Index n = 7;
      const auto res = solve_transform<double>(random_values(n, rng, 4.0),
                                               random_weights(n, rng), d);
      CHECK(!res.collapsed);
      CHECK(res.residual_error <= default_newton_tolerance<double>());
    }
  }
}

TEST_CASE("root respects the feasibility bound") {
  std::mt19937_64 rng(7);
  for (const auto& d : all_divergences<double>()) {
    if (!std::isfinite(d.slope_at_infinity)) continue;
    CAPTURE(d.name);
    for (int trial = 0; trial < 20; ++trial) {
      const VectorXd v = random_values(9, rng, 3.0);
      const VectorXd w = random_weights(9, rng);
      const auto res = solve_transform<double>(v, w, d);
      CHECK(res.value >= v.maxCoeff() - d.slope_at_infinity - 1e-12);
    }
  }
}

TEST_CASE("kl solve survives scaled values that overflow exp") {
  const auto kl = divergence_from_name<double>("kl");
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 40;
    const VectorXd v = random_values(n, rng, 1500.0);
    const VectorXd w = random_weights(n, rng);
    const auto got = solve_transform<double>(v, w, kl);
    const double want = oracle::kl_transform_closed_form<double>(v, w);
    CHECK(std::abs(got.value - want) <= 1e-8 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("long vectors keep the marginal identity tight") {
  std::mt19937_64 rng(9);
  const Index n = 100000;
  for (const char* name : {"kl", "squared_hellinger"}) {
    const auto d = divergence_from_name<double>(name);
    const VectorXd v = random_values(n, rng, 2.0);
    const VectorXd w = random_weights(n, rng);
    const auto res = solve_transform<double>(v, w, d);
    REQUIRE(!res.collapsed);
    double residual = 0;
    for (Index i = 0; i < n; ++i)
      residual += w[i] * d.conjugate_prime(v[i] - res.value);
    CHECK(std::abs(residual - 1.0) <= 10 * default_newton_tolerance<double>());
  }
}

TEST_CASE("newton exhaustion raises a nonconvergence error with context") {
  const auto kl = divergence_from_name<double>("kl");
  VectorXd v(2), w(2);
  v << 0.0, 5.0;
  w << 0.5, 0.5;
  NewtonOptions<double> opts;
  opts.max_iterations = 1;
  opts.tolerance = 1e-14;
  try {
    solve_transform<double>(v, w, kl, opts);
    FAIL("expected NonconvergenceError");
  } catch (const NonconvergenceError& e) {
    CHECK(e.iterations == 1);
    CHECK(std::isfinite(e.last_value));
    CHECK(std::string(e.what()).find("kl") != std::string::npos);
  }
}

TEST_CASE("argument validation") {
  const auto kl = divergence_from_name<double>("kl");
  VectorXd empty(0), one(1);
  one << 0.0;
  CHECK_THROWS_AS(solve_transform<double>(empty, empty, kl),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_transform<double>(one, empty, kl),
                  std::invalid_argument);
  NewtonOptions<double> bad;
  bad.tolerance = 0.0;
  CHECK_THROWS_AS(solve_transform<double>(one, one, kl, bad),
                  std::invalid_argument);
  VectorXd nonfinite(1);
  nonfinite << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(solve_transform<double>(nonfinite, one, kl), NumericalError);
}

TEST_CASE("single precision path") {
  const auto kl = divergence_from_name<float>("kl");
  Eigen::VectorXf v(3), w(3);
  v << 0.0f, 1.0f, -0.5f;
  w << 0.3f, 0.4f, 0.3f;
  const auto res = solve_transform<float>(v, w, kl);
  Eigen::VectorXd vd = v.cast<double>(), wd = w.cast<double>();
  const double want = oracle::kl_transform_closed_form<double>(vd, wd);
  CHECK(std::abs(double(res.value) - want) <= 1e-5);
}
