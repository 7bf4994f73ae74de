#ifndef ORTSAE_SAE_HPP
#define ORTSAE_SAE_HPP

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "ortsae/errors.hpp"
#include "ortsae/rng.hpp"
#include "ortsae/types.hpp"

namespace ortsae {

enum class ActivationMode : std::uint8_t { ReluL1 = 0, TopK = 1, BatchTopK = 2 };

std::string to_string(ActivationMode mode);
ActivationMode activation_mode_from_string(const std::string& name);

/// Loss and sparsity settings for one SAE.
///
/// k_sparsity is the target L0 for the TopK family. lambda weights the L1
/// sparsity penalty and must be zero for TopK/BatchTopK, where sparsity is
/// enforced by selection instead. gamma weights the orthogonality penalty,
/// computed over chunk_count random chunks on steps divisible by
/// penalty_period and scaled by penalty_period to keep the average
/// regularization strength. aux_k = 0 picks the default dead-latent budget
/// min(2 * k_sparsity, m / 2).
struct SaeConfig {
  ActivationMode mode = ActivationMode::BatchTopK;
  Index k_sparsity = 8;
  double lambda = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
  double delta = 1e-8;
  Index chunk_count = 1;
  Index penalty_period = 1;
  Index aux_k = 0;

  /// Throws ConfigError unless the configuration is valid for latent count m.
  void validate(Index m) const;

  double effective_gamma() const {
    return gamma * static_cast<double>(penalty_period);
  }
  Index effective_aux_k(Index m) const {
    return aux_k > 0 ? aux_k : std::min(2 * k_sparsity, m / 2);
  }
};

/// Encoder/decoder weights. w_enc is m x n, w_dec is n x m; decoder columns
/// are the feature directions.
struct SaeParams {
  Matrix w_enc;
  Vector b_enc;
  Matrix w_dec;
  Vector b_dec;

  Index n() const { return w_dec.rows(); }
  Index m() const { return w_dec.cols(); }

  /// Decoder columns drawn isotropically Gaussian and normalized to unit
  /// norm, encoder initialized to the decoder transpose, biases zero.
  static SaeParams init(Index n, Index m, RngStream& rng);

  SaeParams zeros_like() const;
  bool all_finite() const;
};

/// One forward evaluation. latents are nonzero only where active_mask is
/// true; for BatchTopK at most batch * k_sparsity entries are active.
struct ForwardTrace {
  Matrix preacts;     // B x m
  Matrix latents;     // B x m
  Matrix recon;       // B x n (empty until decode)
  BoolMask active_mask;  // B x m
};

struct LossBreakdown {
  double mse = 0.0;
  double sparsity = 0.0;
  double aux = 0.0;
  double ortho = 0.0;
  double total = 0.0;
};

/// Disjoint index chunks covering 0..m-1; members kept in ascending order so
/// a one-chunk partition reproduces the full penalty's arithmetic exactly.
using Partition = std::vector<std::vector<Index>>;

struct OrthoResult {
  double value = 0.0;
  Partition partition;
};

/// preacts = x * w_enc^T + b_enc, then the mode's selection rule applied to
/// the post-ReLU values. If fewer positive entries exist than the selection
/// budget, only the positives are kept. Does not fill recon.
ForwardTrace encode(const SaeParams& params, const SaeConfig& cfg,
                    const Matrix& x);

/// x_hat = latents * w_dec^T + b_dec.
Matrix decode(const SaeParams& params, const Matrix& latents);

/// encode followed by decode; fills every ForwardTrace field.
ForwardTrace forward(const SaeParams& params, const SaeConfig& cfg,
                     const Matrix& x);

/// <u, v> / max(|u| |v|, delta); the clamp absorbs zero vectors.
template <typename DerivedU, typename DerivedV>
double cosine_sim(const Eigen::MatrixBase<DerivedU>& u,
                  const Eigen::MatrixBase<DerivedV>& v, double delta) {
  if (u.size() != v.size()) {
    throw ShapeError("cosine_sim: length mismatch (" + std::to_string(u.size()) +
                     " vs " + std::to_string(v.size()) + ")");
  }
  if (delta <= 0.0) throw ConfigError("cosine_sim: delta must be positive");
  const double denom = std::max(u.norm() * v.norm(), delta);
  return u.dot(v) / denom;
}

/// Shuffle 0..m-1 with rng, split into chunk_count equal chunks, and sort
/// each chunk ascending.
Partition draw_partition(Index m, Index chunk_count, RngStream& rng);

/// Mean over chunks of the mean squared within-chunk maximum pairwise cosine
/// similarity of decoder columns; ties in the max break to the lowest index.
double ortho_penalty_on_partition(const Matrix& w_dec, const Partition& partition,
                                  double delta);

/// Draws a fresh random partition and evaluates the penalty on it, returning
/// the partition for gradient replay.
OrthoResult ortho_penalty_chunked(const Matrix& w_dec, Index chunk_count,
                                  double delta, RngStream& rng);

/// Exact O(m^2) form: a single chunk covering all m latents.
double ortho_penalty_full(const Matrix& w_dec, double delta);

/// Full OrtSAE objective on one batch, given the trace produced from x.
///
/// mse is the batch mean of the squared reconstruction error; sparsity the
/// batch mean L1 of the latents (ReluL1 only); aux the dead-latent residual
/// reconstruction error (zero without a dead mask); ortho the chunk penalty
/// evaluated on `partition` when non-null. total applies lambda, alpha and
/// the period-scaled gamma.
LossBreakdown loss_components(const SaeParams& params, const SaeConfig& cfg,
                              const Matrix& x, const ForwardTrace& trace,
                              const Partition* partition,
                              const BoolVector* dead_mask = nullptr);

/// Spec-facing wrapper: draws the partition from rng and includes the ortho
/// term only when step is a multiple of penalty_period (and gamma > 0).
LossBreakdown loss(const SaeParams& params, const SaeConfig& cfg,
                   const Matrix& x, const ForwardTrace& trace,
                   std::uint64_t step, RngStream rng,
                   const BoolVector* dead_mask = nullptr);

/// Exact gradients of loss_components' total with respect to all four
/// parameter blocks. Selection masks are treated as constants
/// (straight-through on the active support); the within-chunk max is
/// differentiated through its argmax; a clamped cosine denominator is
/// treated as the constant delta.
SaeParams backward(const SaeParams& params, const SaeConfig& cfg,
                   const Matrix& x, const ForwardTrace& trace,
                   const Partition* partition,
                   const BoolVector* dead_mask = nullptr);

/// Accumulate scale * d(ortho penalty)/d(w_dec) into g_wdec. Exposed so the
/// trainer can account the penalty's wall time separately.
void add_ortho_penalty_gradient(Matrix& g_wdec, const Matrix& w_dec,
                                const Partition& partition, double delta,
                                double scale);

}  // namespace ortsae

#endif
