#include "ortsae/metasae.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "ortsae/errors.hpp"
#include "ortsae/metrics.hpp"
#include "ortsae/trainer.hpp"

namespace ortsae {

CompositionResult composition_rate(const Matrix& w_dec, std::uint64_t seed,
                                   const MetaBudget& budget) {
  const Index m = w_dec.cols();
  const Index n = w_dec.rows();
  const Index meta_m = m / 4;
  if (m < 8 || meta_m < 2) {
    throw ConfigError("m: composition rate needs a primary with m/4 >= 2");
  }

  // Decoder columns become data points, normalized to remove scale.
  Matrix points(m, n);
  for (Index j = 0; j < m; ++j) {
    const double norm = w_dec.col(j).norm();
    points.row(j) = w_dec.col(j).transpose();
    if (norm > 0.0) points.row(j) /= norm;
  }

  // Canonical row order: lexicographic, so permuting the primary's columns
  // cannot change the batching sequence.
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    for (Index c = 0; c < n; ++c) {
      if (points(a, c) != points(b, c)) return points(a, c) < points(b, c);
    }
    return false;
  });
  Matrix sorted(m, n);
  for (Index r = 0; r < m; ++r) sorted.row(r) = points.row(order[static_cast<std::size_t>(r)]);

  SaeConfig cfg;
  cfg.mode = ActivationMode::BatchTopK;
  cfg.k_sparsity = std::min<Index>(4, meta_m);
  cfg.alpha = budget.alpha;
  cfg.gamma = 0.0;
  cfg.chunk_count = 1;

  TrainConfig tc;
  tc.learning_rate = budget.learning_rate;
  tc.batch_size = std::min(m, budget.batch_cap);
  tc.total_steps = budget.steps;
  tc.dead_window = budget.dead_window;
  tc.seed = seed;
  tc.log_every = std::max<Index>(1, budget.steps);

  MatrixBatchSource source(sorted, seed);
  CompositionResult result;
  result.meta_params = train(source, cfg, tc, meta_m).params;

  ForwardTrace trace = forward(result.meta_params, cfg, sorted);
  result.rate = explained_variance(sorted, trace.recon);
  return result;
}

}  // namespace ortsae
