#include "ortsae/sae.hpp"

#include <cmath>
#include <limits>

#include "ortsae/numerics.hpp"

namespace ortsae {

std::string to_string(ActivationMode mode) {
  switch (mode) {
    case ActivationMode::ReluL1: return "relu_l1";
    case ActivationMode::TopK: return "topk";
    case ActivationMode::BatchTopK: return "batchtopk";
  }
  throw ConfigError("mode: unknown activation mode tag");
}

ActivationMode activation_mode_from_string(const std::string& name) {
  if (name == "relu_l1") return ActivationMode::ReluL1;
  if (name == "topk") return ActivationMode::TopK;
  if (name == "batchtopk") return ActivationMode::BatchTopK;
  throw ConfigError("mode: expected one of relu_l1|topk|batchtopk, got \"" +
                    name + "\"");
}

void SaeConfig::validate(Index m) const {
  if (m < 1) throw ConfigError("m: latent count must be >= 1");
  if (k_sparsity < 1 || k_sparsity > m) {
    throw ConfigError("k_sparsity: must satisfy 1 <= k_sparsity <= m");
  }
  if (lambda < 0.0) throw ConfigError("lambda: must be >= 0");
  if (alpha < 0.0) throw ConfigError("alpha: must be >= 0");
  if (gamma < 0.0) throw ConfigError("gamma: must be >= 0");
  if (!(delta > 0.0)) throw ConfigError("delta: must be > 0");
  if (chunk_count < 1 || chunk_count > m) {
    throw ConfigError("chunk_count: must satisfy 1 <= chunk_count <= m");
  }
  if (m % chunk_count != 0) {
    throw ConfigError("chunk_count: m must be divisible by chunk_count");
  }
  if (gamma > 0.0 && m / chunk_count < 2) {
    throw ConfigError("chunk_count: chunks need >= 2 members for the penalty");
  }
  if (penalty_period < 1) throw ConfigError("penalty_period: must be >= 1");
  if (aux_k < 0 || aux_k > m) {
    throw ConfigError("aux_k: must satisfy 0 <= aux_k <= m");
  }
  if (mode != ActivationMode::ReluL1 && lambda != 0.0) {
    throw ConfigError("lambda: must be 0 for topk/batchtopk modes");
  }
}

SaeParams SaeParams::init(Index n, Index m, RngStream& rng) {
  SaeParams p;
  p.w_dec.resize(n, m);
  for (Index j = 0; j < m; ++j) {
    double norm = 0.0;
    do {
      for (Index i = 0; i < n; ++i) p.w_dec(i, j) = rng.next_gaussian();
      norm = p.w_dec.col(j).norm();
    } while (norm < 1e-12);
    p.w_dec.col(j) /= norm;
  }
  p.w_enc = p.w_dec.transpose();
  p.b_enc = Vector::Zero(m);
  p.b_dec = Vector::Zero(n);
  return p;
}

SaeParams SaeParams::zeros_like() const {
  SaeParams g;
  g.w_enc = Matrix::Zero(w_enc.rows(), w_enc.cols());
  g.b_enc = Vector::Zero(b_enc.size());
  g.w_dec = Matrix::Zero(w_dec.rows(), w_dec.cols());
  g.b_dec = Vector::Zero(b_dec.size());
  return g;
}

bool SaeParams::all_finite() const {
  return w_enc.allFinite() && b_enc.allFinite() && w_dec.allFinite() &&
         b_dec.allFinite();
}

namespace {

void check_params(const SaeParams& params) {
  const Index n = params.w_dec.rows();
  const Index m = params.w_dec.cols();
  if (params.w_enc.rows() != m || params.w_enc.cols() != n ||
      params.b_enc.size() != m || params.b_dec.size() != n) {
    throw ShapeError("SaeParams: inconsistent block dimensions");
  }
}

// Selection happens on post-ReLU values; only positive entries are eligible.
void mark_topk_positive(const Eigen::Map<const Vector>& values, Index k,
                        Index offset, BoolMask& mask) {
  const Index m = mask.cols();
  for (Index idx : topk_indices(values, k)) {
    if (values(idx) > 0.0) {
      const Index flat = offset + idx;
      mask(flat / m, flat % m) = true;
    }
  }
}

}  // namespace

ForwardTrace encode(const SaeParams& params, const SaeConfig& cfg,
                    const Matrix& x) {
  check_params(params);
  cfg.validate(params.m());
  if (x.cols() != params.n()) {
    throw ShapeError("encode: x has " + std::to_string(x.cols()) +
                     " columns, expected " + std::to_string(params.n()));
  }
  const Index batch = x.rows();
  const Index m = params.m();

  ForwardTrace trace;
  trace.preacts = x * params.w_enc.transpose();
  trace.preacts.rowwise() += params.b_enc.transpose();

  Matrix relu = trace.preacts.cwiseMax(0.0);
  trace.active_mask = BoolMask::Constant(batch, m, false);

  switch (cfg.mode) {
    case ActivationMode::ReluL1:
      trace.active_mask = trace.preacts.array() > 0.0;
      break;
    case ActivationMode::TopK:
      for (Index r = 0; r < batch; ++r) {
        Eigen::Map<const Vector> row(relu.data() + r * m, m);
        mark_topk_positive(row, cfg.k_sparsity, r * m, trace.active_mask);
      }
      break;
    case ActivationMode::BatchTopK: {
      Eigen::Map<const Vector> flat(relu.data(), batch * m);
      mark_topk_positive(flat, batch * cfg.k_sparsity, 0, trace.active_mask);
      break;
    }
  }

  trace.latents = (relu.array() * trace.active_mask.cast<double>()).matrix();
  return trace;
}

Matrix decode(const SaeParams& params, const Matrix& latents) {
  check_params(params);
  if (latents.cols() != params.m()) {
    throw ShapeError("decode: latents have " + std::to_string(latents.cols()) +
                     " columns, expected " + std::to_string(params.m()));
  }
  Matrix recon = latents * params.w_dec.transpose();
  recon.rowwise() += params.b_dec.transpose();
  return recon;
}

ForwardTrace forward(const SaeParams& params, const SaeConfig& cfg,
                     const Matrix& x) {
  ForwardTrace trace = encode(params, cfg, x);
  trace.recon = decode(params, trace.latents);
  return trace;
}

Partition draw_partition(Index m, Index chunk_count, RngStream& rng) {
  if (chunk_count < 1) throw ConfigError("chunk_count: must be >= 1");
  if (m % chunk_count != 0) {
    throw ConfigError("chunk_count: m must be divisible by chunk_count");
  }
  const Index chunk_size = m / chunk_count;
  if (chunk_size < 2) {
    throw ConfigError("chunk_count: chunks need >= 2 members");
  }
  std::vector<Index> order(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
  for (Index i = m - 1; i > 0; --i) {
    const Index j = static_cast<Index>(
        rng.next_below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(j)]);
  }
  Partition partition(static_cast<std::size_t>(chunk_count));
  for (Index k = 0; k < chunk_count; ++k) {
    auto first = order.begin() + k * chunk_size;
    partition[static_cast<std::size_t>(k)].assign(first, first + chunk_size);
    std::sort(partition[static_cast<std::size_t>(k)].begin(),
              partition[static_cast<std::size_t>(k)].end());
  }
  return partition;
}

namespace {

void check_partition(const Partition& partition, Index m) {
  std::vector<bool> seen(static_cast<std::size_t>(m), false);
  Index covered = 0;
  for (const auto& chunk : partition) {
    if (chunk.size() < 2) {
      throw ConfigError("chunk_count: chunks need >= 2 members");
    }
    for (Index idx : chunk) {
      if (idx < 0 || idx >= m || seen[static_cast<std::size_t>(idx)]) {
        throw ConsistencyError(
            "partition does not match the decoder (stale replay?)");
      }
      seen[static_cast<std::size_t>(idx)] = true;
      ++covered;
    }
  }
  if (covered != m) {
    throw ConsistencyError(
        "partition does not cover all latents (stale replay?)");
  }
}

// Returns, for chunk member index i, the position of the within-chunk argmax
// cosine (ties to the lowest index) together with the cosine value.
struct ChunkMax {
  Index argmax_pos;
  double value;
};

Matrix chunk_gram(const Matrix& w_dec, const std::vector<Index>& chunk) {
  const Index c = static_cast<Index>(chunk.size());
  Matrix cols(w_dec.rows(), c);
  for (Index a = 0; a < c; ++a) {
    cols.col(a) = w_dec.col(chunk[static_cast<std::size_t>(a)]);
  }
  return cols.transpose() * cols;
}

ChunkMax chunk_max_cosine(const Matrix& gram, const Vector& norms,
                          const std::vector<Index>& chunk, Index pos,
                          double delta) {
  const Index c = static_cast<Index>(chunk.size());
  ChunkMax best{-1, -std::numeric_limits<double>::infinity()};
  const double norm_i = norms(chunk[static_cast<std::size_t>(pos)]);
  for (Index b = 0; b < c; ++b) {
    if (b == pos) continue;
    const double denom =
        std::max(norm_i * norms(chunk[static_cast<std::size_t>(b)]), delta);
    const double cos_val = gram(pos, b) / denom;
    if (cos_val > best.value) best = {b, cos_val};
  }
  return best;
}

}  // namespace

double ortho_penalty_on_partition(const Matrix& w_dec,
                                  const Partition& partition, double delta) {
  if (!(delta > 0.0)) throw ConfigError("delta: must be > 0");
  check_partition(partition, w_dec.cols());
  const Vector norms = w_dec.colwise().norm().transpose();
  double across = 0.0;
  for (const auto& chunk : partition) {
    const Matrix gram = chunk_gram(w_dec, chunk);
    const Index c = static_cast<Index>(chunk.size());
    double within = 0.0;
    for (Index a = 0; a < c; ++a) {
      const double max_cos =
          chunk_max_cosine(gram, norms, chunk, a, delta).value;
      within += max_cos * max_cos;
    }
    across += within / static_cast<double>(c);
  }
  return across / static_cast<double>(partition.size());
}

OrthoResult ortho_penalty_chunked(const Matrix& w_dec, Index chunk_count,
                                  double delta, RngStream& rng) {
  OrthoResult result;
  result.partition = draw_partition(w_dec.cols(), chunk_count, rng);
  result.value = ortho_penalty_on_partition(w_dec, result.partition, delta);
  return result;
}

double ortho_penalty_full(const Matrix& w_dec, double delta) {
  const Index m = w_dec.cols();
  if (m < 2) throw ConfigError("m: penalty needs at least 2 decoder columns");
  Partition all(1);
  all[0].resize(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) all[0][static_cast<std::size_t>(i)] = i;
  return ortho_penalty_on_partition(w_dec, all, delta);
}

namespace {

struct AuxEval {
  bool active = false;
  BoolMask mask;   // B x m, selected dead latents
  Matrix z;        // B x m, post-ReLU values on the selected support
  Matrix e_hat;    // B x n, residual reconstruction (no decoder bias)
  double value = 0.0;
};

// Residual reconstruction through the top aux_k dead latents per example,
// ranked by post-ReLU preactivation (ties to the lowest index).
AuxEval eval_aux(const SaeParams& params, const SaeConfig& cfg, const Matrix& x,
                 const ForwardTrace& trace, const BoolVector* dead_mask) {
  AuxEval aux;
  if (dead_mask == nullptr) return aux;
  const Index m = params.m();
  if (dead_mask->size() != m) {
    throw ShapeError("dead_mask: expected length " + std::to_string(m));
  }
  if (!dead_mask->any()) return aux;

  const Index batch = x.rows();
  const Index budget = cfg.effective_aux_k(m);
  aux.active = true;
  aux.mask = BoolMask::Constant(batch, m, false);

  Vector masked(m);
  for (Index r = 0; r < batch; ++r) {
    for (Index j = 0; j < m; ++j) {
      const double v = trace.preacts(r, j);
      masked(j) = ((*dead_mask)(j) && v > 0.0) ? v : 0.0;
    }
    for (Index idx : topk_indices(masked, budget)) {
      if (masked(idx) > 0.0) aux.mask(r, idx) = true;
    }
  }

  aux.z = (trace.preacts.cwiseMax(0.0).array() * aux.mask.cast<double>())
              .matrix();
  aux.e_hat = aux.z * params.w_dec.transpose();
  aux.value = (x - trace.recon - aux.e_hat).squaredNorm() /
              static_cast<double>(batch);
  return aux;
}

void check_trace(const SaeParams& params, const Matrix& x,
                 const ForwardTrace& trace) {
  const Index batch = x.rows();
  if (x.cols() != params.n()) {
    throw ShapeError("loss: x width does not match the parameters");
  }
  if (trace.preacts.rows() != batch || trace.preacts.cols() != params.m() ||
      trace.latents.rows() != batch || trace.latents.cols() != params.m() ||
      trace.recon.rows() != batch || trace.recon.cols() != params.n()) {
    throw ShapeError("loss: trace does not match x and the parameters");
  }
}

}  // namespace

LossBreakdown loss_components(const SaeParams& params, const SaeConfig& cfg,
                              const Matrix& x, const ForwardTrace& trace,
                              const Partition* partition,
                              const BoolVector* dead_mask) {
  check_params(params);
  check_trace(params, x, trace);
  const double batch = static_cast<double>(x.rows());

  LossBreakdown out;
  out.mse = (x - trace.recon).squaredNorm() / batch;
  if (cfg.mode == ActivationMode::ReluL1) {
    out.sparsity = trace.latents.sum() / batch;
  }
  const AuxEval aux = eval_aux(params, cfg, x, trace, dead_mask);
  out.aux = aux.value;
  if (partition != nullptr) {
    out.ortho = ortho_penalty_on_partition(params.w_dec, *partition, cfg.delta);
  }
  out.total = out.mse + cfg.lambda * out.sparsity + cfg.alpha * out.aux +
              cfg.effective_gamma() * out.ortho;
  return out;
}

LossBreakdown loss(const SaeParams& params, const SaeConfig& cfg,
                   const Matrix& x, const ForwardTrace& trace,
                   std::uint64_t step, RngStream rng,
                   const BoolVector* dead_mask) {
  const bool penalty_step =
      cfg.gamma > 0.0 &&
      step % static_cast<std::uint64_t>(cfg.penalty_period) == 0;
  if (!penalty_step) {
    return loss_components(params, cfg, x, trace, nullptr, dead_mask);
  }
  const Partition partition =
      draw_partition(params.m(), cfg.chunk_count, rng);
  return loss_components(params, cfg, x, trace, &partition, dead_mask);
}

void add_ortho_penalty_gradient(Matrix& g_wdec, const Matrix& w_dec,
                                const Partition& partition, double delta,
                                double scale) {
  check_partition(partition, w_dec.cols());
  const Vector norms = w_dec.colwise().norm().transpose();
  const double chunk_count = static_cast<double>(partition.size());
  for (const auto& chunk : partition) {
    const Matrix gram = chunk_gram(w_dec, chunk);
    const Index c = static_cast<Index>(chunk.size());
    for (Index a = 0; a < c; ++a) {
      const ChunkMax best = chunk_max_cosine(gram, norms, chunk, a, delta);
      const Index i = chunk[static_cast<std::size_t>(a)];
      const Index j = chunk[static_cast<std::size_t>(best.argmax_pos)];
      const double coeff =
          scale * 2.0 * best.value / (chunk_count * static_cast<double>(c));
      const double prod = norms(i) * norms(j);
      if (prod > delta) {
        g_wdec.col(i) += coeff * (w_dec.col(j) / prod -
                                  best.value * w_dec.col(i) /
                                      (norms(i) * norms(i)));
        g_wdec.col(j) += coeff * (w_dec.col(i) / prod -
                                  best.value * w_dec.col(j) /
                                      (norms(j) * norms(j)));
      } else {
        g_wdec.col(i) += coeff * w_dec.col(j) / delta;
        g_wdec.col(j) += coeff * w_dec.col(i) / delta;
      }
    }
  }
}

SaeParams backward(const SaeParams& params, const SaeConfig& cfg,
                   const Matrix& x, const ForwardTrace& trace,
                   const Partition* partition, const BoolVector* dead_mask) {
  check_params(params);
  check_trace(params, x, trace);
  if (partition != nullptr) check_partition(*partition, params.m());
  const double batch = static_cast<double>(x.rows());

  SaeParams grad = params.zeros_like();

  // Reconstruction and auxiliary paths share the decoder.
  Matrix g_recon = (2.0 / batch) * (trace.recon - x);
  const AuxEval aux = eval_aux(params, cfg, x, trace, dead_mask);
  Matrix g_ehat;
  if (aux.active && cfg.alpha != 0.0) {
    const Matrix r = x - trace.recon - aux.e_hat;
    g_recon -= cfg.alpha * (2.0 / batch) * r;  // through e = x - recon
    g_ehat = cfg.alpha * (-2.0 / batch) * r;
  }

  grad.b_dec = g_recon.colwise().sum().transpose();
  grad.w_dec = g_recon.transpose() * trace.latents;
  if (g_ehat.size() > 0) grad.w_dec += g_ehat.transpose() * aux.z;

  Matrix g_latents = g_recon * params.w_dec;
  if (cfg.mode == ActivationMode::ReluL1 && cfg.lambda != 0.0) {
    g_latents.array() +=
        (cfg.lambda / batch) * (trace.latents.array() > 0.0).cast<double>();
  }
  Matrix g_pre =
      (g_latents.array() * trace.active_mask.cast<double>()).matrix();
  if (g_ehat.size() > 0) {
    g_pre.array() +=
        (g_ehat * params.w_dec).array() * aux.mask.cast<double>();
  }

  grad.b_enc = g_pre.colwise().sum().transpose();
  grad.w_enc = g_pre.transpose() * x;

  const double gamma_eff = cfg.effective_gamma();
  if (partition != nullptr && gamma_eff != 0.0) {
    add_ortho_penalty_gradient(grad.w_dec, params.w_dec, *partition, cfg.delta,
                               gamma_eff);
  }
  return grad;
}

}  // namespace ortsae
