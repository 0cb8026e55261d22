#pragma once

// Registry of the f-divergences with closed-form convex conjugates.
//
// Each divergence is generated by a convex function normalized so that
// generator(1) = 0 and restricted to nonnegative densities. The solver only
// ever touches the conjugate and its first two derivatives, plus the
// asymptotic slope lim generator(x)/x which bounds the conjugate's domain.
// Conjugate evaluations above that slope return +infinity.

#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fot/types.hpp"

namespace fot {

enum class DivergenceId {
  kl,
  reverse_kl,
  chi2,
  reverse_chi2,
  squared_hellinger,
  jensen_shannon,
  jeffreys,
  triangular,
};

namespace detail {

// Solves w + log(w) = y by Newton, for y >= 1 (so w >= 1). The iteration is
// monotone increasing from the initial guess, which sits below the root.
inline double lambert_w_log_newton(double y) {
  double w = y > 3.0 ? y - std::log(y) : 1.0;
  for (int i = 0; i < 50; ++i) {
    const double step = (w + std::log(w) - y) * w / (w + 1.0);
    w -= step;
    if (std::abs(step) <= 1e-14 * (1.0 + std::abs(w))) break;
  }
  return w;
}

}  // namespace detail

// Principal branch of the Lambert W function, w * exp(w) = x, for x >= 0.
// Newton iteration with initial guess log(1 + x), which lies above the root
// so the iterates decrease monotonically; at most 50 iterations. Arguments
// too large for exp() are handled through the logarithmic form.
inline double lambert_w(double x) {
  if (std::isnan(x) || x < 0.0)
    throw std::domain_error("lambert_w: argument must be nonnegative, got " +
                            std::to_string(x));
  if (x == 0.0) return 0.0;
  if (x > 1e16) return detail::lambert_w_log_newton(std::log(x));
  double w = std::log1p(x);
  for (int i = 0; i < 50; ++i) {
    const double ew = std::exp(w);
    const double step = (w * ew - x) / (ew * (w + 1.0));
    w -= step;
    if (std::abs(step) <= 1e-14 * (1.0 + std::abs(w))) break;
  }
  return w;
}

// W(exp(y)) without forming exp(y); safe for the whole double range.
inline double lambert_w_exp(double y) {
  if (y > 36.0) return detail::lambert_w_log_newton(y);
  return lambert_w(std::exp(y));
}

namespace div {

template <typename S>
struct Kl {
  static constexpr DivergenceId id = DivergenceId::kl;
  static constexpr const char* name = "kl";
  static constexpr bool requires_double = false;
  static constexpr S slope_at_infinity() { return infinity<S>(); }
  static constexpr S generator_at_zero() { return S(1); }
  static S generator(S x) {
    if (x < S(0)) return infinity<S>();
    if (x == S(0)) return S(1);
    return x * std::log(x) - x + S(1);
  }
  static S conjugate(S t) { return std::expm1(t); }
  static S conjugate_prime(S t) { return std::exp(t); }
  static S conjugate_second(S t) { return std::exp(t); }
};

template <typename S>
struct ReverseKl {
  static constexpr DivergenceId id = DivergenceId::reverse_kl;
  static constexpr const char* name = "reverse_kl";
  static constexpr bool requires_double = false;
  static constexpr S slope_at_infinity() { return S(1); }
  static constexpr S generator_at_zero() { return infinity<S>(); }
  static S generator(S x) {
    if (x < S(0) || x == S(0)) return infinity<S>();
    return x - S(1) - std::log(x);
  }
  static S conjugate(S t) {
    if (t > S(1)) return infinity<S>();
    return -std::log1p(-t);
  }
  static S conjugate_prime(S t) {
    if (t > S(1)) return infinity<S>();
    return S(1) / (S(1) - t);
  }
  static S conjugate_second(S t) {
    if (t > S(1)) return infinity<S>();
    const S r = S(1) / (S(1) - t);
    return r * r;
  }
};

template <typename S>
struct Chi2 {
  static constexpr DivergenceId id = DivergenceId::chi2;
  static constexpr const char* name = "chi2";
  static constexpr bool requires_double = false;
  static constexpr S slope_at_infinity() { return infinity<S>(); }
  static constexpr S generator_at_zero() { return S(1); }
  static S generator(S x) {
    if (x < S(0)) return infinity<S>();
    const S d = x - S(1);
    return d * d;
  }
  static S conjugate(S t) {
    if (t < S(-2)) return S(-1);
    return S(0.25) * t * t + t;
  }
  static S conjugate_prime(S t) {
    if (t < S(-2)) return S(0);
    return S(0.5) * t + S(1);
  }
  static S conjugate_second(S t) {
    if (t < S(-2)) return S(0);
    return S(0.5);
  }
};

template <typename S>
struct ReverseChi2 {
  static constexpr DivergenceId id = DivergenceId::reverse_chi2;
  static constexpr const char* name = "reverse_chi2";
  static constexpr bool requires_double = false;
  static constexpr S slope_at_infinity() { return S(1); }
  static constexpr S generator_at_zero() { return infinity<S>(); }
  static S generator(S x) {
    if (x < S(0) || x == S(0)) return infinity<S>();
    return S(1) / x + x - S(2);
  }
  static S conjugate(S t) {
    if (t > S(1)) return infinity<S>();
    return S(2) - S(2) * std::sqrt(S(1) - t);
  }
  static S conjugate_prime(S t) {
    if (t > S(1)) return infinity<S>();
    return S(1) / std::sqrt(S(1) - t);
  }
  static S conjugate_second(S t) {
    if (t > S(1)) return infinity<S>();
    const S r = std::sqrt(S(1) - t);
    return S(0.5) / (r * r * r);
  }
};

template <typename S>
struct SquaredHellinger {
  static constexpr DivergenceId id = DivergenceId::squared_hellinger;
  static constexpr const char* name = "squared_hellinger";
  static constexpr bool requires_double = false;
  static constexpr S slope_at_infinity() { return S(1); }
  static constexpr S generator_at_zero() { return S(1); }
  static S generator(S x) {
    if (x < S(0)) return infinity<S>();
    const S d = std::sqrt(x) - S(1);
    return d * d;
  }
  static S conjugate(S t) {
    if (t > S(1)) return infinity<S>();
    return t / (S(1) - t);
  }
  static S conjugate_prime(S t) {
    if (t > S(1)) return infinity<S>();
    const S r = S(1) / (S(1) - t);
    return r * r;
  }
  static S conjugate_second(S t) {
    if (t > S(1)) return infinity<S>();
    const S r = S(1) / (S(1) - t);
    return S(2) * r * r * r;
  }
};

template <typename S>
struct JensenShannon {
  static constexpr DivergenceId id = DivergenceId::jensen_shannon;
  static constexpr const char* name = "jensen_shannon";
  static constexpr bool requires_double = false;
  static S slope_at_infinity() { return std::log(S(2)); }
  static S generator_at_zero() { return std::log(S(2)); }
  static S generator(S x) {
    if (x < S(0)) return infinity<S>();
    if (x == S(0)) return std::log(S(2));
    return x * std::log(x) - (x + S(1)) * std::log(S(0.5) * (x + S(1)));
  }
  static S conjugate(S t) {
    if (t > std::log(S(2))) return infinity<S>();
    return -std::log1p(-std::expm1(t));
  }
  static S conjugate_prime(S t) {
    if (t > std::log(S(2))) return infinity<S>();
    const S et = std::exp(t);
    return et / (S(2) - et);
  }
  static S conjugate_second(S t) {
    if (t > std::log(S(2))) return infinity<S>();
    const S et = std::exp(t);
    const S d = S(2) - et;
    return S(2) * et / (d * d);
  }
};

template <typename S>
struct Jeffreys {
  static constexpr DivergenceId id = DivergenceId::jeffreys;
  static constexpr const char* name = "jeffreys";
  static constexpr bool requires_double = true;
  static constexpr S slope_at_infinity() { return infinity<S>(); }
  static constexpr S generator_at_zero() { return infinity<S>(); }
  static S generator(S x) {
    if (x < S(0) || x == S(0)) return infinity<S>();
    return (x - S(1)) * std::log(x);
  }
  static S conjugate(S t) {
    const double w = lambert_w_exp(1.0 - double(t));
    return S(double(t) + w + 1.0 / w - 2.0);
  }
  static S conjugate_prime(S t) {
    return S(1.0 / lambert_w_exp(1.0 - double(t)));
  }
  static S conjugate_second(S t) {
    const double w = lambert_w_exp(1.0 - double(t));
    return S(1.0 / (w * (w + 1.0)));
  }
};

template <typename S>
struct Triangular {
  static constexpr DivergenceId id = DivergenceId::triangular;
  static constexpr const char* name = "triangular";
  static constexpr bool requires_double = false;
  static constexpr S slope_at_infinity() { return S(1); }
  static constexpr S generator_at_zero() { return S(1); }
  static S generator(S x) {
    if (x < S(0)) return infinity<S>();
    const S d = x - S(1);
    return d * d / (x + S(1));
  }
  static S conjugate(S t) {
    if (t > S(1)) return infinity<S>();
    if (t < S(-3)) return S(-1);
    const S r = std::sqrt(S(1) - t);
    return (r - S(1)) * (r - S(3));
  }
  static S conjugate_prime(S t) {
    if (t > S(1)) return infinity<S>();
    if (t < S(-3)) return S(0);
    return S(2) / std::sqrt(S(1) - t) - S(1);
  }
  static S conjugate_second(S t) {
    if (t > S(1)) return infinity<S>();
    if (t < S(-3)) return S(0);
    const S r = std::sqrt(S(1) - t);
    return S(1) / (r * r * r);
  }
};

}  // namespace div

// Value-type handle to a registered divergence. Cheap to copy; all function
// members are pure and thread-safe.
template <typename S>
struct Divergence {
  DivergenceId id{};
  std::string_view name;
  S slope_at_infinity{};
  S generator_at_zero{};
  bool requires_double = false;
  S (*generator)(S) = nullptr;
  S (*conjugate)(S) = nullptr;
  S (*conjugate_prime)(S) = nullptr;
  S (*conjugate_second)(S) = nullptr;
};

// Invokes fn with the tag type of the divergence, so hot loops can inline
// the conjugate formulas instead of going through function pointers.
template <typename S, typename Fn>
decltype(auto) dispatch_divergence(DivergenceId id, Fn&& fn) {
  switch (id) {
    case DivergenceId::kl: return fn(div::Kl<S>{});
    case DivergenceId::reverse_kl: return fn(div::ReverseKl<S>{});
    case DivergenceId::chi2: return fn(div::Chi2<S>{});
    case DivergenceId::reverse_chi2: return fn(div::ReverseChi2<S>{});
    case DivergenceId::squared_hellinger: return fn(div::SquaredHellinger<S>{});
    case DivergenceId::jensen_shannon: return fn(div::JensenShannon<S>{});
    case DivergenceId::jeffreys: return fn(div::Jeffreys<S>{});
    case DivergenceId::triangular: return fn(div::Triangular<S>{});
  }
  throw std::logic_error("dispatch_divergence: invalid id");
}

namespace detail {

template <typename S, template <typename> class Tag>
Divergence<S> make_divergence() {
  Divergence<S> d;
  d.id = Tag<S>::id;
  d.name = Tag<S>::name;
  d.slope_at_infinity = Tag<S>::slope_at_infinity();
  d.generator_at_zero = Tag<S>::generator_at_zero();
  d.requires_double = Tag<S>::requires_double;
  d.generator = &Tag<S>::generator;
  d.conjugate = &Tag<S>::conjugate;
  d.conjugate_prime = &Tag<S>::conjugate_prime;
  d.conjugate_second = &Tag<S>::conjugate_second;
  return d;
}

}  // namespace detail

template <typename S>
const std::array<Divergence<S>, 8>& all_divergences() {
  static const std::array<Divergence<S>, 8> table = {
      detail::make_divergence<S, div::Kl>(),
      detail::make_divergence<S, div::ReverseKl>(),
      detail::make_divergence<S, div::Chi2>(),
      detail::make_divergence<S, div::ReverseChi2>(),
      detail::make_divergence<S, div::SquaredHellinger>(),
      detail::make_divergence<S, div::JensenShannon>(),
      detail::make_divergence<S, div::Jeffreys>(),
      detail::make_divergence<S, div::Triangular>(),
  };
  return table;
}

inline const std::vector<std::string>& divergence_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& d : all_divergences<double>()) out.emplace_back(d.name);
    return out;
  }();
  return names;
}

template <typename S>
Divergence<S> divergence_from_id(DivergenceId id) {
  for (const auto& d : all_divergences<S>())
    if (d.id == id) return d;
  throw std::logic_error("divergence_from_id: invalid id");
}

template <typename S>
Divergence<S> divergence_from_name(std::string_view name) {
  for (const auto& d : all_divergences<S>())
    if (d.name == name) return d;
  std::ostringstream msg;
  msg << "unknown divergence '" << name << "'; valid names are:";
  for (const auto& n : divergence_names()) msg << ' ' << n;
  throw std::invalid_argument(msg.str());
}

inline DivergenceId divergence_id_from_name(std::string_view name) {
  return divergence_from_name<double>(name).id;
}

// Generator evaluated at a density value; +infinity at zero density when the
// generator diverges there.
template <typename S>
S primal_generator_value(const Divergence<S>& d, S density) {
  if (std::isnan(density) || density < S(0))
    throw std::domain_error(std::string(d.name) +
                            ": generator argument must be a nonnegative "
                            "density");
  if (density == S(0)) return d.generator_at_zero;
  return d.generator(density);
}

}  // namespace fot
