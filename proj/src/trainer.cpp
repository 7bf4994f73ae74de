#include "ortsae/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "ortsae/checkpoint.hpp"
#include "ortsae/config_json.hpp"

namespace ortsae {

namespace {
// Substream ids under the run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kPartitionStream = 2;
constexpr std::uint64_t kDataStream = 3;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}
}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate: must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size: must be >= 1");
  if (total_steps < 0) throw ConfigError("total_steps: must be >= 0");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0) {
    throw ConfigError("adam_beta1: must be in [0, 1)");
  }
  if (adam_beta2 < 0.0 || adam_beta2 >= 1.0) {
    throw ConfigError("adam_beta2: must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps: must be > 0");
  if (weight_decay < 0.0) throw ConfigError("weight_decay: must be >= 0");
  if (dead_window < 1) throw ConfigError("dead_window: must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every: must be >= 0");
  if (log_every < 1) throw ConfigError("log_every: must be >= 1");
}

MatrixBatchSource::MatrixBatchSource(Matrix data, std::uint64_t seed)
    : data_(std::move(data)), rng_(RngStream(seed).split(kDataStream)) {
  if (data_.rows() < 1 || data_.cols() < 1) {
    throw DataError("batch source needs a non-empty matrix");
  }
  order_.resize(static_cast<std::size_t>(data_.rows()));
  std::iota(order_.begin(), order_.end(), Index{0});
  reshuffle();
}

void MatrixBatchSource::reshuffle() {
  for (Index i = data_.rows() - 1; i > 0; --i) {
    const Index j = static_cast<Index>(
        rng_.next_below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order_[static_cast<std::size_t>(i)],
              order_[static_cast<std::size_t>(j)]);
  }
}

Matrix MatrixBatchSource::next_batch(Index rows) {
  if (rows < 1) throw ConfigError("batch_size: must be >= 1");
  Matrix out(rows, data_.cols());
  for (Index r = 0; r < rows; ++r) {
    if (cursor_ == data_.rows()) {
      reshuffle();
      cursor_ = 0;
    }
    out.row(r) = data_.row(order_[static_cast<std::size_t>(cursor_++)]);
  }
  return out;
}

double aux_loss(const SaeParams& params, const SaeConfig& cfg, const Matrix& x,
                const ForwardTrace& trace, const BoolVector& dead_mask) {
  return loss_components(params, cfg, x, trace, nullptr, &dead_mask).aux;
}

void adam_step(TrainState& state, SaeParams& params, const SaeParams& grads,
               const TrainConfig& cfg, ActivationMode mode) {
  if (!grads.all_finite()) {
    throw TrainingError("training aborted: non-finite gradient at step " +
                        std::to_string(state.step));
  }
  if (grads.w_enc.rows() != params.w_enc.rows() ||
      grads.w_enc.cols() != params.w_enc.cols() ||
      grads.w_dec.rows() != params.w_dec.rows() ||
      grads.w_dec.cols() != params.w_dec.cols() ||
      grads.b_enc.size() != params.b_enc.size() ||
      grads.b_dec.size() != params.b_dec.size()) {
    throw ShapeError("adam_step: gradient shape does not match parameters");
  }
  if (state.adam_m.w_enc.size() == 0) {
    state.adam_m = params.zeros_like();
    state.adam_v = params.zeros_like();
  }

  SaeParams g = grads;
  if (mode == ActivationMode::ReluL1) {
    // Keep decoder columns on the unit sphere: drop the parallel component
    // of the gradient, update, then renormalize.
    for (Index j = 0; j < params.w_dec.cols(); ++j) {
      const auto col = params.w_dec.col(j);
      const double nn = col.squaredNorm();
      if (nn > 0.0) g.w_dec.col(j) -= col * (col.dot(g.w_dec.col(j)) / nn);
    }
  }

  const std::uint64_t t = ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));

  auto update = [&](auto& p, auto& m, auto& v, const auto& gr) {
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * gr;
    v.array() =
        cfg.adam_beta2 * v.array() + (1.0 - cfg.adam_beta2) * gr.array().square();
    if (cfg.weight_decay != 0.0) {
      p *= 1.0 - cfg.learning_rate * cfg.weight_decay;
    }
    p.array() -= cfg.learning_rate * (m.array() / bc1) /
                 ((v.array() / bc2).sqrt() + cfg.adam_eps);
  };
  update(params.w_enc, state.adam_m.w_enc, state.adam_v.w_enc, g.w_enc);
  update(params.b_enc, state.adam_m.b_enc, state.adam_v.b_enc, g.b_enc);
  update(params.w_dec, state.adam_m.w_dec, state.adam_v.w_dec, g.w_dec);
  update(params.b_dec, state.adam_m.b_dec, state.adam_v.b_dec, g.b_dec);

  if (mode == ActivationMode::ReluL1) {
    for (Index j = 0; j < params.w_dec.cols(); ++j) {
      const double norm = params.w_dec.col(j).norm();
      if (norm > 0.0) params.w_dec.col(j) /= norm;
    }
  }
}

RngStream partition_stream(std::uint64_t seed, std::uint64_t step) {
  return RngStream(seed).split(kPartitionStream).split(step);
}

std::string metrics_csv(const std::vector<StepLog>& log) {
  std::string out = "step,mse,l0,ortho,dead,total\n";
  char row[256];
  for (const StepLog& s : log) {
    std::snprintf(row, sizeof(row), "%llu,%.17g,%.17g,%.17g,%lld,%.17g\n",
                  static_cast<unsigned long long>(s.step), s.mse, s.l0,
                  s.ortho, static_cast<long long>(s.dead), s.total);
    out += row;
  }
  return out;
}

namespace {

nlohmann::json checkpoint_metadata(const SaeConfig& cfg,
                                   const TrainConfig& train_cfg, Index m,
                                   std::uint64_t step,
                                   const std::vector<std::uint64_t>& last_fired) {
  nlohmann::json meta;
  meta["config"] = config_to_json(cfg, train_cfg, m);
  meta["step"] = step;
  meta["seed"] = train_cfg.seed;
  meta["last_fired"] = last_fired;
  return meta;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw DataError("cannot open \"" + path + "\" for writing");
  std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
}

}  // namespace

TrainResult train(BatchSource& source, const SaeConfig& sae_cfg,
                  const TrainConfig& train_cfg, Index m,
                  const std::string& out_dir) {
  sae_cfg.validate(m);
  train_cfg.validate();
  const Index n = source.dim();
  if (n < 1) throw DataError("data source has zero width");
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  RngStream init_rng = RngStream(train_cfg.seed).split(kInitStream);
  SaeParams params = SaeParams::init(n, m, init_rng);

  TrainState state;
  state.adam_m = params.zeros_like();
  state.adam_v = params.zeros_like();
  state.last_fired.assign(static_cast<std::size_t>(m), 0);

  TrainResult result;
  const auto run_start = Clock::now();

  for (Index step = 0; step < train_cfg.total_steps; ++step) {
    const std::uint64_t t = static_cast<std::uint64_t>(step);
    Matrix x = source.next_batch(train_cfg.batch_size);
    ForwardTrace trace = forward(params, sae_cfg, x);

    BoolVector dead(m);
    for (Index j = 0; j < m; ++j) {
      dead(j) = t > static_cast<std::uint64_t>(train_cfg.dead_window) +
                        state.last_fired[static_cast<std::size_t>(j)];
    }
    const bool use_aux = sae_cfg.alpha > 0.0 && dead.any();
    const BoolVector* dead_ptr = use_aux ? &dead : nullptr;

    const bool penalty_step =
        sae_cfg.gamma > 0.0 &&
        t % static_cast<std::uint64_t>(sae_cfg.penalty_period) == 0;

    LossBreakdown lb =
        loss_components(params, sae_cfg, x, trace, nullptr, dead_ptr);
    SaeParams grads = backward(params, sae_cfg, x, trace, nullptr, dead_ptr);

    if (penalty_step) {
      const auto ortho_start = Clock::now();
      RngStream prng = partition_stream(train_cfg.seed, t);
      const Partition partition =
          draw_partition(m, sae_cfg.chunk_count, prng);
      lb.ortho =
          ortho_penalty_on_partition(params.w_dec, partition, sae_cfg.delta);
      lb.total = lb.mse + sae_cfg.lambda * lb.sparsity +
                 sae_cfg.alpha * lb.aux + sae_cfg.effective_gamma() * lb.ortho;
      add_ortho_penalty_gradient(grads.w_dec, params.w_dec, partition,
                                 sae_cfg.delta, sae_cfg.effective_gamma());
      result.ortho_seconds += seconds_since(ortho_start);
    }

    if (!std::isfinite(lb.total)) {
      throw TrainingError("training aborted: non-finite loss at step " +
                          std::to_string(t));
    }

    if (step % train_cfg.log_every == 0 || step == train_cfg.total_steps - 1) {
      StepLog row;
      row.step = t;
      row.mse = lb.mse;
      row.l0 = static_cast<double>(trace.active_mask.count()) /
               static_cast<double>(x.rows());
      row.ortho = lb.ortho;
      row.dead = static_cast<Index>(dead.count());
      row.total = lb.total;
      result.log.push_back(row);
    }
    if (!out_dir.empty() && train_cfg.checkpoint_every > 0 &&
        step % train_cfg.checkpoint_every == 0) {
      // Snapshot of the state entering this step, so the logged loss can be
      // recomputed from it exactly.
      write_checkpoint(
          out_dir + "/ckpt_step" + std::to_string(t) + ".bin", params,
          sae_cfg.mode,
          checkpoint_metadata(sae_cfg, train_cfg, m, t, state.last_fired));
    }

    adam_step(state, params, grads, train_cfg, sae_cfg.mode);

    const auto fired = trace.active_mask.colwise().any();
    for (Index j = 0; j < m; ++j) {
      if (fired(j)) state.last_fired[static_cast<std::size_t>(j)] = t;
    }
  }

  result.total_seconds = seconds_since(run_start);
  result.params = params;
  result.last_fired = state.last_fired;
  const std::uint64_t end_step =
      static_cast<std::uint64_t>(train_cfg.total_steps);
  for (Index j = 0; j < m; ++j) {
    if (end_step > static_cast<std::uint64_t>(train_cfg.dead_window) +
                       state.last_fired[static_cast<std::size_t>(j)]) {
      ++result.final_dead;
    }
  }

  if (!out_dir.empty()) {
    write_checkpoint(out_dir + "/checkpoint.bin", params, sae_cfg.mode,
                     checkpoint_metadata(sae_cfg, train_cfg, m, end_step,
                                         state.last_fired));
    write_text_file(out_dir + "/metrics.csv", metrics_csv(result.log));
  }
  return result;
}

}  // namespace ortsae
