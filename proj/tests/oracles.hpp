// Independent reference implementations used only by the test suites.
// Everything here is deliberately written with plain loops and none of the
// library's code paths, so it can serve as an oracle for them.
#ifndef ORTSAE_TESTS_ORACLES_HPP
#define ORTSAE_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "ortsae/sae.hpp"
#include "ortsae/types.hpp"

namespace oracles {

using ortsae::Index;
using ortsae::Matrix;
using ortsae::SaeParams;
using ortsae::Vector;

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (Index k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

// Full stable sort by (value desc, index asc); returns the first k indices.
inline std::vector<Index> sorted_topk(const std::vector<double>& values,
                                      Index k) {
  std::vector<Index> order(values.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (values[static_cast<std::size_t>(a)] !=
        values[static_cast<std::size_t>(b)]) {
      return values[static_cast<std::size_t>(a)] >
             values[static_cast<std::size_t>(b)];
    }
    return a < b;
  });
  order.resize(static_cast<std::size_t>(
      std::min<Index>(k, static_cast<Index>(values.size()))));
  return order;
}

inline double two_pass_variance_total(const Matrix& x) {
  double total = 0.0;
  for (Index j = 0; j < x.cols(); ++j) {
    double mean = 0.0;
    for (Index i = 0; i < x.rows(); ++i) mean += x(i, j);
    mean /= static_cast<double>(x.rows());
    double acc = 0.0;
    for (Index i = 0; i < x.rows(); ++i) {
      acc += (x(i, j) - mean) * (x(i, j) - mean);
    }
    total += acc / static_cast<double>(x.rows());
  }
  return total;
}

inline double naive_cosine(const Matrix& w, Index i, Index j, double delta) {
  double dot = 0.0, ni = 0.0, nj = 0.0;
  for (Index r = 0; r < w.rows(); ++r) {
    dot += w(r, i) * w(r, j);
    ni += w(r, i) * w(r, i);
    nj += w(r, j) * w(r, j);
  }
  const double denom = std::max(std::sqrt(ni) * std::sqrt(nj), delta);
  return dot / denom;
}

// Eq.-style double loop over all ordered pairs: per column, the squared max
// cosine to any other column, averaged.
inline double naive_ortho_full(const Matrix& w, double delta) {
  const Index m = w.cols();
  double acc = 0.0;
  for (Index i = 0; i < m; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < m; ++j) {
      if (j == i) continue;
      best = std::max(best, naive_cosine(w, i, j, delta));
    }
    acc += best * best;
  }
  return acc / static_cast<double>(m);
}

inline double naive_mean_max_cosine(const Matrix& w, double delta) {
  const Index m = w.cols();
  double acc = 0.0;
  for (Index i = 0; i < m; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < m; ++j) {
      if (j == i) continue;
      best = std::max(best, naive_cosine(w, i, j, delta));
    }
    acc += best;
  }
  return acc / static_cast<double>(m);
}

inline double kl_div(const Vector& p, const Vector& q) {
  double acc = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0.0) acc += p(i) * std::log(p(i) / q(i));
  }
  return acc;
}

inline double direct_explained_variance(const Matrix& x, const Matrix& x_hat) {
  return 1.0 - two_pass_variance_total(x - x_hat) / two_pass_variance_total(x);
}

// Central finite differences of an arbitrary scalar function of the
// parameters, coordinate by coordinate.
inline SaeParams fd_gradient(const SaeParams& p0,
                             const std::function<double(const SaeParams&)>& f,
                             double h) {
  SaeParams grad = p0.zeros_like();
  auto run_block = [&](auto select) {
    const Index count = select(grad).size();
    for (Index k = 0; k < count; ++k) {
      SaeParams plus = p0;
      select(plus).data()[k] += h;
      SaeParams minus = p0;
      select(minus).data()[k] -= h;
      select(grad).data()[k] = (f(plus) - f(minus)) / (2.0 * h);
    }
  };
  run_block([](SaeParams& p) -> Matrix& { return p.w_enc; });
  run_block([](SaeParams& p) -> Matrix& { return p.w_dec; });
  run_block([](SaeParams& p) -> Vector& { return p.b_enc; });
  run_block([](SaeParams& p) -> Vector& { return p.b_dec; });
  return grad;
}

// Per-coordinate relative error with a small floor so coordinates whose true
// gradient is zero compare on absolute terms.
inline double max_rel_error(const SaeParams& a, const SaeParams& b,
                            double floor = 1e-4) {
  double worst = 0.0;
  auto scan = [&](const auto& x, const auto& y) {
    for (Index k = 0; k < x.size(); ++k) {
      const double va = x.data()[k];
      const double vb = y.data()[k];
      const double denom = std::max({std::abs(va), std::abs(vb), floor});
      worst = std::max(worst, std::abs(va - vb) / denom);
    }
  };
  scan(a.w_enc, b.w_enc);
  scan(a.b_enc, b.b_enc);
  scan(a.w_dec, b.w_dec);
  scan(a.b_dec, b.b_dec);
  return worst;
}

inline Matrix random_matrix(Index rows, Index cols, ortsae::RngStream& rng,
                            double scale = 1.0) {
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) out(i, j) = scale * rng.next_gaussian();
  }
  return out;
}

inline Matrix random_unit_columns(Index rows, Index cols,
                                  ortsae::RngStream& rng) {
  Matrix out = random_matrix(rows, cols, rng);
  for (Index j = 0; j < cols; ++j) out.col(j) /= out.col(j).norm();
  return out;
}

}  // namespace oracles

#endif
