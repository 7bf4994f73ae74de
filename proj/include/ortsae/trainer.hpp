#ifndef ORTSAE_TRAINER_HPP
#define ORTSAE_TRAINER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ortsae/rng.hpp"
#include "ortsae/sae.hpp"
#include "ortsae/types.hpp"

namespace ortsae {

struct TrainConfig {
  double learning_rate = 2e-4;
  Index batch_size = 256;
  Index total_steps = 5000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;   // AdamW decay, decoupled; 0 by default
  Index dead_window = 200;     // steps without firing before a latent is dead
  std::uint64_t seed = 0;
  Index checkpoint_every = 0;  // 0: only the final checkpoint
  Index log_every = 100;

  void validate() const;
};

/// Mutable optimizer state owned by one training run.
struct TrainState {
  SaeParams adam_m;
  SaeParams adam_v;
  std::uint64_t step = 0;
  std::vector<std::uint64_t> last_fired;  // per latent, step of last firing
};

/// Yields training batches of a fixed width.
class BatchSource {
public:
  virtual ~BatchSource() = default;
  virtual Index dim() const = 0;
  virtual Matrix next_batch(Index rows) = 0;
};

/// Cycles through an in-memory matrix, reshuffling the row order with its
/// own stream whenever the data is exhausted.
class MatrixBatchSource final : public BatchSource {
public:
  MatrixBatchSource(Matrix data, std::uint64_t seed);
  Index dim() const override { return data_.cols(); }
  Matrix next_batch(Index rows) override;

private:
  void reshuffle();
  Matrix data_;
  std::vector<Index> order_;
  Index cursor_ = 0;
  RngStream rng_;
};

/// Mean squared error of reconstructing the residual x - x_hat through the
/// top aux_k dead latents; zero when nothing is dead.
double aux_loss(const SaeParams& params, const SaeConfig& cfg, const Matrix& x,
                const ForwardTrace& trace, const BoolVector& dead_mask);

/// Bias-corrected Adam update of all four parameter blocks, with decoupled
/// weight decay when configured. For ReluL1 the decoder-gradient component
/// parallel to each column is removed before the update and the columns are
/// renormalized to unit norm afterwards. Throws TrainingError on non-finite
/// gradients.
void adam_step(TrainState& state, SaeParams& params, const SaeParams& grads,
               const TrainConfig& cfg, ActivationMode mode);

struct StepLog {
  std::uint64_t step = 0;
  double mse = 0.0;
  double l0 = 0.0;
  double ortho = 0.0;
  Index dead = 0;
  double total = 0.0;
};

struct TrainResult {
  SaeParams params;
  std::vector<StepLog> log;
  std::vector<std::uint64_t> last_fired;
  Index final_dead = 0;
  double ortho_seconds = 0.0;  // wall time spent on the penalty + its gradient
  double total_seconds = 0.0;
};

/// Runs total_steps of forward/loss/backward/adam. The ortho term is applied
/// on steps divisible by penalty_period with gamma scaled by the period; the
/// chunk partition for step t derives from (seed, t). When out_dir is
/// non-empty, writes metrics.csv, periodic ckpt_step<t>.bin snapshots (taken
/// before the step's update) and a final checkpoint.bin.
TrainResult train(BatchSource& source, const SaeConfig& sae_cfg,
                  const TrainConfig& train_cfg, Index m,
                  const std::string& out_dir = "");

/// The metrics rows as written to metrics.csv (header step,mse,l0,ortho,dead,total).
std::string metrics_csv(const std::vector<StepLog>& log);

/// Partition stream for a given training step; exposed so checkpointed losses
/// can be recomputed exactly.
RngStream partition_stream(std::uint64_t seed, std::uint64_t step);

}  // namespace ortsae

#endif
