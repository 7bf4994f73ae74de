#ifndef ORTSAE_TYPES_HPP
#define ORTSAE_TYPES_HPP

#include <Eigen/Core>

namespace ortsae {

using Index = Eigen::Index;

/// Row-major dense storage; the universal carrier for activations and weights.
template <typename Scalar>
using DenseMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// All training math runs in 64-bit; file formats store 32-bit and widen on load.
using Matrix = DenseMatrix<double>;
using Vector = DenseVector<double>;
using MatrixF = DenseMatrix<float>;

using BoolMask =
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using BoolVector = Eigen::Array<bool, Eigen::Dynamic, 1>;

}  // namespace ortsae

#endif
