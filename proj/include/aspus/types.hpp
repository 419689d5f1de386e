#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace aspus {

using Index = Eigen::Index;

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Real = double;
using Matrix = DenseMatrix<Real>;
using Vector = DenseVector<Real>;
using IntVector = DenseVector<int>;
using ByteMatrix = DenseMatrix<std::uint8_t>;

}  // namespace aspus
