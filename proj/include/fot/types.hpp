#pragma once

#include <Eigen/Core>

namespace fot {

using Index = Eigen::Index;

// Point clouds are stored one point per row; row-major keeps a single
// point contiguous in memory.
template <typename Scalar>
using PointMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
constexpr Scalar infinity() {
  return std::numeric_limits<Scalar>::infinity();
}

}  // namespace fot
