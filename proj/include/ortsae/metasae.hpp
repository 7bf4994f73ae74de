#ifndef ORTSAE_METASAE_HPP
#define ORTSAE_METASAE_HPP

#include <cstdint>

#include "ortsae/sae.hpp"
#include "ortsae/types.hpp"

namespace ortsae {

/// Desk-scale training budget for the secondary SAE.
struct MetaBudget {
  Index steps = 4000;
  Index batch_cap = 256;  // batch = min(m, batch_cap)
  double learning_rate = 2e-4;
  double alpha = 1.0 / 32.0;
  Index dead_window = 200;
};

struct CompositionResult {
  double rate = 0.0;  // explained variance of the meta-reconstruction
  SaeParams meta_params;
};

/// Trains a BatchTopK SAE with dictionary size m/4 and k = 4 on the primary
/// decoder's unit-normalized columns and returns the explained variance of
/// the meta-reconstruction over all columns. Columns are put into a
/// canonical order first, so the result is invariant to their input order.
/// Lower values indicate higher atomicity.
CompositionResult composition_rate(const Matrix& w_dec, std::uint64_t seed,
                                   const MetaBudget& budget = {});

}  // namespace ortsae

#endif
