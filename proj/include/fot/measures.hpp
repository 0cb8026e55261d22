#pragma once

// Discrete measures (weighted point clouds), cost matrices with gradient
// callbacks, seeded synthetic 2-D datasets, and point-cloud CSV I/O.

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fot/types.hpp"

namespace fot {

template <typename S>
constexpr S measure_weight_tolerance() {
  return std::is_same_v<S, float> ? S(1e-5) : S(1e-12);
}

template <typename S>
struct DiscreteMeasure {
  PointMatrix<S> points;       // n x d, one support point per row
  Eigen::VectorX<S> weights;   // strictly positive, sums to one

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }
  std::span<const S> point(Index i) const {
    return {points.data() + i * points.cols(), static_cast<size_t>(points.cols())};
  }
};

template <typename S>
void validate_measure(const DiscreteMeasure<S>& m) {
  if (m.points.rows() == 0)
    throw std::invalid_argument("measure: empty support");
  if (m.weights.size() != m.points.rows())
    throw std::invalid_argument("measure: weight/point count mismatch");
  if (!m.points.allFinite())
    throw std::invalid_argument("measure: non-finite support point");
  for (Index i = 0; i < m.weights.size(); ++i)
    if (!(m.weights[i] > S(0)) || !std::isfinite(m.weights[i]))
      throw std::invalid_argument("measure: weights must be strictly positive");
  const S total = m.weights.sum();
  if (std::abs(total - S(1)) > measure_weight_tolerance<S>())
    throw std::invalid_argument("measure: weights must sum to one, got " +
                                std::to_string(double(total)));
}

template <typename S>
DiscreteMeasure<S> uniform_measure(PointMatrix<S> points) {
  DiscreteMeasure<S> m;
  m.weights = Eigen::VectorX<S>::Constant(points.rows(), S(1) / S(points.rows()));
  m.weights /= m.weights.sum();
  m.points = std::move(points);
  return m;
}

// ---------------------------------------------------------------------------
// Cost models

enum class CostId { half_squared_euclidean };

template <typename S>
struct CostModel {
  CostId id{};
  std::string_view name;
  S (*value)(std::span<const S> x, std::span<const S> y) = nullptr;
  void (*grad_x)(std::span<const S> x, std::span<const S> y, std::span<S> out) = nullptr;
};

namespace detail {

template <typename S>
S half_sq_euclidean_value(std::span<const S> x, std::span<const S> y) {
  S acc = 0;
  for (size_t k = 0; k < x.size(); ++k) {
    const S d = x[k] - y[k];
    acc += d * d;
  }
  return S(0.5) * acc;
}

template <typename S>
void half_sq_euclidean_grad(std::span<const S> x, std::span<const S> y,
                            std::span<S> out) {
  for (size_t k = 0; k < x.size(); ++k) out[k] = x[k] - y[k];
}

}  // namespace detail

template <typename S>
CostModel<S> cost_from_id(CostId id) {
  switch (id) {
    case CostId::half_squared_euclidean:
      return {CostId::half_squared_euclidean, "half_sq_euclidean",
              &detail::half_sq_euclidean_value<S>,
              &detail::half_sq_euclidean_grad<S>};
  }
  throw std::logic_error("cost_from_id: invalid id");
}

template <typename S>
struct CostMatrix {
  Eigen::MatrixX<S> values;  // k x l
  CostId id = CostId::half_squared_euclidean;

  CostModel<S> model() const { return cost_from_id<S>(id); }
};

// Dense cost matrix; entries are evaluated pointwise by the scalar cost so
// they match a scalar re-evaluation bit for bit.
template <typename S>
CostMatrix<S> build_cost(const DiscreteMeasure<S>& a, const DiscreteMeasure<S>& b,
                         CostId id = CostId::half_squared_euclidean) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("build_cost: dimension mismatch, " +
                                std::to_string(a.dim()) + " vs " +
                                std::to_string(b.dim()));
  const CostModel<S> model = cost_from_id<S>(id);
  CostMatrix<S> cost;
  cost.id = id;
  cost.values.resize(a.size(), b.size());
  for (Index i = 0; i < a.size(); ++i)
    for (Index j = 0; j < b.size(); ++j)
      cost.values(i, j) = model.value(a.point(i), b.point(j));
  return cost;
}

// ---------------------------------------------------------------------------
// Synthetic 2-D datasets
//
// Sampling is fully specified so clouds are reproducible across platforms:
// a std::mt19937_64 engine seeded directly, uniforms drawn as
// ((x >> 11) + 1) * 2^-53 in (0, 1], gaussians via the Box-Muller transform
// (both outputs used, in order), and out-of-box draws rejected until the
// point lands in the unit square. Points are generated in double and cast.

enum class DatasetId { crescents, densities, moons, slopes };

inline const std::vector<std::string>& dataset_names() {
  static const std::vector<std::string> names = {"crescents", "densities",
                                                 "moons", "slopes"};
  return names;
}

inline DatasetId dataset_from_name(std::string_view name) {
  if (name == "crescents") return DatasetId::crescents;
  if (name == "densities") return DatasetId::densities;
  if (name == "moons") return DatasetId::moons;
  if (name == "slopes") return DatasetId::slopes;
  std::ostringstream msg;
  msg << "unknown dataset '" << name << "'; valid names are:";
  for (const auto& n : dataset_names()) msg << ' ' << n;
  throw std::invalid_argument(msg.str());
}

namespace detail {

class SampleStream {
 public:
  explicit SampleStream(std::uint64_t seed) : engine_(seed) {}

  double uniform01() {  // (0, 1]
    return double((engine_() >> 11) + 1) * 0x1p-53;
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  // Draws from fn until the point lies in the unit square.
  template <typename Fn>
  std::pair<double, double> in_unit_box(Fn&& fn) {
    for (;;) {
      const auto [x, y] = fn();
      if (x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0) return {x, y};
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

inline std::pair<double, double> arc_point(SampleStream& rng, double cx,
                                           double cy, double radius,
                                           double radius_sigma,
                                           double angle_lo, double angle_hi,
                                           double noise_sigma) {
  const double angle = angle_lo + (angle_hi - angle_lo) * rng.uniform01();
  const double r = radius + radius_sigma * rng.gaussian();
  return {cx + r * std::cos(angle) + noise_sigma * rng.gaussian(),
          cy + r * std::sin(angle) + noise_sigma * rng.gaussian()};
}

inline std::pair<double, double> mixture_point(
    SampleStream& rng, std::span<const std::array<double, 3>> components) {
  const double pick = rng.uniform01() * double(components.size());
  const auto& c = components[std::min(components.size() - 1,
                                      size_t(pick))];
  return {c[0] + c[2] * rng.gaussian(), c[1] + c[2] * rng.gaussian()};
}

// Inverse CDF of the density proportional to a + b t on [0, 1], a + b/2 = 1.
inline double graded01(double u, double a, double b) {
  return (std::sqrt(a * a + 2.0 * b * u) - a) / b;
}

}  // namespace detail

template <typename S>
std::pair<DiscreteMeasure<S>, DiscreteMeasure<S>> generate_dataset(
    DatasetId id, Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
  detail::SampleStream rng(seed);

  PointMatrix<double> a(n, 2), b(n, 2);
  auto fill = [&](PointMatrix<double>& out, auto&& draw) {
    for (Index i = 0; i < n; ++i) {
      const auto [x, y] = rng.in_unit_box(draw);
      out(i, 0) = x;
      out(i, 1) = y;
    }
  };

  switch (id) {
    case DatasetId::crescents:
      // Two thick arcs opening toward each other.
      fill(a, [&] {
        return detail::arc_point(rng, 0.50, 0.52, 0.33, 0.030, 0.6 * M_PI,
                                 1.4 * M_PI, 0.012);
      });
      fill(b, [&] {
        return detail::arc_point(rng, 0.50, 0.48, 0.33, 0.030, -0.4 * M_PI,
                                 0.4 * M_PI, 0.012);
      });
      break;
    case DatasetId::densities: {
      // Gaussian mixtures, two blobs against three.
      static constexpr std::array<std::array<double, 3>, 2> blobs_a = {
          {{0.30, 0.30, 0.055}, {0.68, 0.38, 0.050}}};
      static constexpr std::array<std::array<double, 3>, 3> blobs_b = {
          {{0.25, 0.72, 0.050}, {0.52, 0.68, 0.055}, {0.78, 0.74, 0.050}}};
      fill(a, [&] { return detail::mixture_point(rng, blobs_a); });
      fill(b, [&] { return detail::mixture_point(rng, blobs_b); });
      break;
    }
    case DatasetId::moons:
      // Interlocking half circles.
      fill(a, [&] {
        return detail::arc_point(rng, 0.40, 0.42, 0.30, 0.0, 0.0, M_PI, 0.035);
      });
      fill(b, [&] {
        return detail::arc_point(rng, 0.60, 0.58, 0.30, 0.0, M_PI, 2.0 * M_PI,
                                 0.035);
      });
      break;
    case DatasetId::slopes:
      // Linearly graded densities with opposite gradients.
      fill(a, [&] {
        return std::pair{detail::graded01(rng.uniform01(), 0.25, 1.5),
                         detail::graded01(rng.uniform01(), 1.75, -1.5)};
      });
      fill(b, [&] {
        return std::pair{detail::graded01(rng.uniform01(), 1.75, -1.5),
                         detail::graded01(rng.uniform01(), 0.25, 1.5)};
      });
      break;
  }

  return {uniform_measure<S>(a.template cast<S>()),
          uniform_measure<S>(b.template cast<S>())};
}

template <typename S>
std::pair<DiscreteMeasure<S>, DiscreteMeasure<S>> generate_dataset(
    std::string_view name, Index n, std::uint64_t seed) {
  return generate_dataset<S>(dataset_from_name(name), n, seed);
}

// ---------------------------------------------------------------------------
// Point-cloud CSV: header "x,y,weight", one support point per row, decimal
// strings at full double precision, LF line endings.

template <typename S>
void save_measure_csv(const DiscreteMeasure<S>& m, const std::string& path) {
  if (m.dim() != 2)
    throw std::invalid_argument("save_measure_csv: only 2-D clouds supported");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_measure_csv: cannot open " + path);
  out << "x,y,weight\n";
  char line[128];
  for (Index i = 0; i < m.size(); ++i) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n",
                  double(m.points(i, 0)), double(m.points(i, 1)),
                  double(m.weights[i]));
    out << line;
  }
  if (!out) throw std::runtime_error("save_measure_csv: write failed: " + path);
}

namespace detail {

inline double parse_csv_field(const std::string& field, const std::string& path) {
  size_t used = 0;
  double value = 0;
  try {
    value = std::stod(field, &used);
  } catch (const std::exception&) {
    throw std::runtime_error("load_measure_csv: bad number '" + field +
                             "' in " + path);
  }
  if (used != field.size())
    throw std::runtime_error("load_measure_csv: bad number '" + field +
                             "' in " + path);
  return value;
}

}  // namespace detail

template <typename S>
DiscreteMeasure<S> load_measure_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_measure_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_measure_csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,y,weight")
    throw std::runtime_error("load_measure_csv: expected header 'x,y,weight' in " +
                             path);
  std::vector<std::array<double, 3>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<double, 3> row{};
    std::stringstream fields(line);
    std::string field;
    for (int k = 0; k < 3; ++k) {
      if (!std::getline(fields, field, ','))
        throw std::runtime_error("load_measure_csv: short row in " + path);
      row[k] = detail::parse_csv_field(field, path);
    }
    if (std::getline(fields, field, ','))
      throw std::runtime_error("load_measure_csv: extra column in " + path);
    rows.push_back(row);
  }
  if (rows.empty())
    throw std::runtime_error("load_measure_csv: no data rows in " + path);

  PointMatrix<double> points(Index(rows.size()), 2);
  Eigen::VectorXd weights(Index(rows.size()));
  for (Index i = 0; i < Index(rows.size()); ++i) {
    points(i, 0) = rows[i][0];
    points(i, 1) = rows[i][1];
    weights[i] = rows[i][2];
    if (!std::isfinite(rows[i][0]) || !std::isfinite(rows[i][1]))
      throw std::runtime_error("load_measure_csv: non-finite point in " + path);
    if (!(rows[i][2] > 0.0) || !std::isfinite(rows[i][2]))
      throw std::runtime_error(
          "load_measure_csv: weights must be strictly positive in " + path);
  }
  const double total = weights.sum();
  if (std::abs(total - 1.0) > 1e-9)
    throw std::runtime_error("load_measure_csv: weights sum to " +
                             std::to_string(total) +
                             ", more than 1e-9 away from 1, in " + path);
  // Renormalize only genuine drift; a sum already inside the measure
  // tolerance is kept bit-for-bit so that save/load round-trips exactly.
  if (std::abs(total - 1.0) > measure_weight_tolerance<double>())
    weights /= total;

  DiscreteMeasure<S> m;
  m.points = points.cast<S>();
  m.weights = weights.cast<S>();
  validate_measure(m);
  return m;
}

}  // namespace fot
