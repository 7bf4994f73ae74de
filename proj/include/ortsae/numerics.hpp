#ifndef ORTSAE_NUMERICS_HPP
#define ORTSAE_NUMERICS_HPP

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "ortsae/errors.hpp"
#include "ortsae/types.hpp"

namespace ortsae {

/// Shape-checked matrix product. Eigen evaluates the product; the result is
/// deterministic for fixed inputs regardless of internal blocking.
template <typename DerivedA, typename DerivedB>
DenseMatrix<typename DerivedA::Scalar> matmul(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ (" +
                     std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()) + ")");
  }
  return a * b;
}

/// Indices of the k largest entries, ordered by value descending with ties
/// broken toward the lowest index. Returns min(k, size) indices.
template <typename Derived>
std::vector<Index> topk_indices(const Eigen::DenseBase<Derived>& values,
                                Index k) {
  using Scalar = typename Derived::Scalar;
  if (k < 0) throw ConfigError("topk_indices: k must be non-negative");
  const Index size = values.size();
  std::vector<std::pair<Scalar, Index>> order;
  order.reserve(static_cast<std::size_t>(size));
  for (Index i = 0; i < size; ++i) order.emplace_back(values(i), i);
  const Index take = std::min(k, size);
  auto better = [](const std::pair<Scalar, Index>& a,
                   const std::pair<Scalar, Index>& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  std::partial_sort(order.begin(), order.begin() + take, order.end(), better);
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(take));
  for (Index i = 0; i < take; ++i) out.push_back(order[static_cast<std::size_t>(i)].second);
  return out;
}

/// Sum over columns of the per-column variance (mean-centered, divisor rows).
template <typename Derived>
double row_variance_total(const Eigen::MatrixBase<Derived>& x) {
  if (x.rows() < 2) {
    throw DataError("row_variance_total: need at least 2 rows, got " +
                    std::to_string(x.rows()));
  }
  double total = 0.0;
  for (Index j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).mean();
    total += (x.col(j).array() - mean).square().sum() /
             static_cast<double>(x.rows());
  }
  return total;
}

}  // namespace ortsae

#endif
