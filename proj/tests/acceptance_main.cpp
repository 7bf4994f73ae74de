// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavier experiments (criteria 5-7) share their trained models.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "ortsae/activation_io.hpp"
#include "ortsae/checkpoint.hpp"
#include "ortsae/datagen.hpp"
#include "ortsae/errors.hpp"
#include "ortsae/metasae.hpp"
#include "ortsae/metrics.hpp"
#include "ortsae/trainer.hpp"

using namespace ortsae;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(int id, const std::string& name, bool pass,
            const std::string& detail, double secs) {
  if (!pass) ++g_failures;
  std::printf("[%s] criterion %d: %s (%s) [%.1fs]\n", pass ? "PASS" : "FAIL",
              id, name.c_str(), detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Criterion 1: chunked(1) == full == naive double loop.

void criterion_1() {
  const auto start = Clock::now();
  RngStream rng(101);
  double worst_chunk = 0.0, worst_naive = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.next_below(15));   // <= 16
    const Index m = 2 + static_cast<Index>(rng.next_below(63));   // <= 64
    Matrix w = oracles::random_matrix(n, m, rng);
    RngStream draw = rng.split(static_cast<std::uint64_t>(trial));
    const double chunked = ortho_penalty_chunked(w, 1, 1e-8, draw).value;
    const double full = ortho_penalty_full(w, 1e-8);
    const double naive = oracles::naive_ortho_full(w, 1e-8);
    worst_chunk = std::max(worst_chunk, std::abs(chunked - full));
    worst_naive = std::max(worst_naive, std::abs(full - naive));
  }
  const double secs = seconds_since(start);
  const bool pass = worst_chunk <= 1e-12 && worst_naive <= 1e-12 && secs < 1.0;
  report(1, "oracle equivalence",
         pass,
         "max |chunked-full|=" + fmt(worst_chunk) +
             ", max |full-naive|=" + fmt(worst_naive),
         secs);
}

// ---------------------------------------------------------------------------
// Criterion 2: analytic gradients vs central finite differences.

struct GradInstance {
  SaeParams params;
  SaeConfig cfg;
  Matrix x;
  Partition partition;
  BoolVector dead;
};

GradInstance grad_instance(ActivationMode mode, double lambda, double alpha,
                           double gamma, std::uint64_t seed) {
  GradInstance inst;
  RngStream rng(seed);
  const Index n = 8, m = 32, batch = 4;
  inst.params = SaeParams::init(n, m, rng);
  inst.params.b_enc = oracles::random_matrix(m, 1, rng, 0.2).col(0);
  inst.params.b_dec = oracles::random_matrix(n, 1, rng, 0.2).col(0);
  inst.cfg.mode = mode;
  inst.cfg.k_sparsity = 4;
  inst.cfg.lambda = lambda;
  inst.cfg.alpha = alpha;
  inst.cfg.gamma = gamma;
  inst.cfg.chunk_count = 2;
  inst.x = oracles::random_matrix(batch, n, rng);
  RngStream prng = rng.split(5);
  inst.partition = draw_partition(m, inst.cfg.chunk_count, prng);
  inst.dead = BoolVector::Constant(m, false);
  for (Index j = 0; j < m; j += 3) inst.dead(j) = true;
  return inst;
}

double fd_error(const GradInstance& inst) {
  const Partition* part = inst.cfg.gamma > 0.0 ? &inst.partition : nullptr;
  const BoolVector* dead = inst.cfg.alpha > 0.0 ? &inst.dead : nullptr;
  auto loss_fn = [&](const SaeParams& p) {
    ForwardTrace trace = forward(p, inst.cfg, inst.x);
    return loss_components(p, inst.cfg, inst.x, trace, part, dead).total;
  };
  ForwardTrace trace = forward(inst.params, inst.cfg, inst.x);
  SaeParams analytic =
      backward(inst.params, inst.cfg, inst.x, trace, part, dead);
  SaeParams numeric = oracles::fd_gradient(inst.params, loss_fn, 1e-5);
  return oracles::max_rel_error(analytic, numeric);
}

void criterion_2() {
  const auto start = Clock::now();
  double worst = 0.0;
  std::uint64_t seed = 7000;
  struct Combo {
    double lambda, alpha, gamma;
  };
  const std::vector<Combo> relu = {
      {0, 0, 0}, {0.05, 0, 0}, {0, 0.5, 0}, {0, 0, 0.8}, {0.05, 0.5, 0.8}};
  const std::vector<Combo> topk = {{0, 0, 0}, {0, 0.5, 0}, {0, 0, 0.8},
                                   {0, 0.5, 0.8}};
  for (const Combo& c : relu) {
    worst = std::max(
        worst, fd_error(grad_instance(ActivationMode::ReluL1, c.lambda,
                                      c.alpha, c.gamma, ++seed)));
  }
  for (ActivationMode mode :
       {ActivationMode::TopK, ActivationMode::BatchTopK}) {
    for (const Combo& c : topk) {
      worst = std::max(worst, fd_error(grad_instance(mode, c.lambda, c.alpha,
                                                     c.gamma, ++seed)));
    }
  }
  const double secs = seconds_since(start);
  report(2, "gradient correctness", worst < 1e-5 && secs < 30.0,
         "worst per-coordinate rel err=" + fmt(worst) + " (h=1e-5)", secs);
}

// ---------------------------------------------------------------------------
// Criterion 3: selection invariants against sort oracles.

void criterion_3() {
  const auto start = Clock::now();
  RngStream rng(303);
  bool ok = true;
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    const Index m = 4 + static_cast<Index>(rng.next_below(29));
    const Index batch = 1 + static_cast<Index>(rng.next_below(8));
    const Index k = 1 + static_cast<Index>(rng.next_below(
                            static_cast<std::uint64_t>(m)));
    SaeParams p;
    p.w_enc = Matrix::Identity(m, m);
    p.b_enc = Vector::Zero(m);
    p.w_dec = Matrix::Identity(m, m);
    p.b_dec = Vector::Zero(m);
    Matrix x = oracles::random_matrix(batch, m, rng);
    SaeConfig cfg;
    cfg.k_sparsity = k;

    cfg.mode = ActivationMode::TopK;
    ForwardTrace t = encode(p, cfg, x);
    for (Index r = 0; r < batch && ok; ++r) {
      std::vector<double> row(static_cast<std::size_t>(m));
      Index positives = 0;
      for (Index j = 0; j < m; ++j) {
        row[static_cast<std::size_t>(j)] = std::max(x(r, j), 0.0);
        if (x(r, j) > 0.0) ++positives;
      }
      Index active = 0;
      for (Index j = 0; j < m; ++j) active += t.active_mask(r, j) ? 1 : 0;
      ok = ok && active == std::min(k, positives);
      for (Index idx : oracles::sorted_topk(row, k)) {
        if (row[static_cast<std::size_t>(idx)] > 0.0) {
          ok = ok && t.active_mask(r, idx);
        }
      }
    }

    cfg.mode = ActivationMode::BatchTopK;
    t = encode(p, cfg, x);
    std::vector<double> flat;
    Index positives = 0;
    for (Index r = 0; r < batch; ++r) {
      for (Index j = 0; j < m; ++j) {
        flat.push_back(std::max(x(r, j), 0.0));
        if (x(r, j) > 0.0) ++positives;
      }
    }
    ok = ok && t.active_mask.count() == std::min(batch * k, positives);
    for (Index idx : oracles::sorted_topk(flat, batch * k)) {
      if (flat[static_cast<std::size_t>(idx)] > 0.0) {
        ok = ok && t.active_mask(idx / m, idx % m);
      }
    }
  }
  report(3, "selection invariants", ok,
         "1000 random batches vs sort oracles", seconds_since(start));
}

// ---------------------------------------------------------------------------
// Criterion 4: analytic examples.

void criterion_4() {
  const auto start = Clock::now();
  Matrix w(2, 3);
  const double s = 1.0 / std::sqrt(2.0);
  w << 1, 0, s, 0, 1, s;
  const double penalty = ortho_penalty_full(w, 1e-8);
  const double mcs = mean_cos_sim(w, 1e-8);

  Vector orig(3), abl(3);
  orig << 0.2, 0.5, 0.3;
  abl << 0.6, 0.2, 0.2;
  const double kl_perfect = kl_divergence_score(orig, orig, abl);
  const double kl_ablated = kl_divergence_score(orig, abl, abl);

  const bool pass = std::abs(penalty - 0.5) <= 1e-12 &&
                    std::abs(mcs - s) <= 1e-12 && kl_perfect == 1.0 &&
                    kl_ablated == 0.0;
  report(4, "analytic examples", pass,
         "penalty=" + fmt(penalty) + ", meancossim=" + fmt(mcs) +
             ", kl endpoints " + fmt(kl_perfect) + "/" + fmt(kl_ablated),
         seconds_since(start));
}

// ---------------------------------------------------------------------------
// Criteria 5-7: scaled experiments on the default synthetic world.

struct RunArtifacts {
  SaeParams params;
  double ev = 0.0;
  double mcs = 0.0;
  double mmcs = 0.0;
  double ortho_share = 0.0;
};

struct SeedData {
  SyntheticWorld world;
  Matrix train_data;
  Matrix eval_data;
};

SeedData make_seed_data(std::uint64_t seed) {
  SeedData d;
  RngStream base(seed);
  RngStream wrng = base.split(100);
  d.world = default_world(wrng);
  RngStream trng = base.split(101);
  d.train_data = sample_batch(d.world, 65536, trng).x;
  RngStream erng = base.split(102);
  d.eval_data = sample_batch(d.world, 8192, erng).x;
  return d;
}

double batched_ev(const SaeParams& params, const SaeConfig& cfg,
                  const Matrix& data, Index batch_size) {
  Matrix recon(data.rows(), data.cols());
  for (Index at = 0; at < data.rows(); at += batch_size) {
    const Index rows = std::min(batch_size, data.rows() - at);
    ForwardTrace t = forward(params, cfg, Matrix(data.middleRows(at, rows)));
    recon.middleRows(at, rows) = t.recon;
  }
  return explained_variance(data, recon);
}

RunArtifacts run_experiment(const SeedData& d, double gamma, Index chunk_count,
                            Index penalty_period, std::uint64_t seed) {
  SaeConfig cfg;
  cfg.mode = ActivationMode::BatchTopK;
  cfg.k_sparsity = 8;
  cfg.alpha = 1.0 / 32.0;
  cfg.gamma = gamma;
  cfg.chunk_count = chunk_count;
  cfg.penalty_period = penalty_period;

  TrainConfig tc;
  tc.learning_rate = 2e-4;
  tc.batch_size = 256;
  tc.total_steps = 5000;
  tc.dead_window = 200;
  tc.seed = seed;
  tc.log_every = 1000;

  MatrixBatchSource source(d.train_data, tc.seed);
  TrainResult result = train(source, cfg, tc, 128);

  RunArtifacts art;
  art.params = result.params;
  art.ev = batched_ev(result.params, cfg, d.eval_data, tc.batch_size);
  art.mcs = mean_cos_sim(result.params.w_dec, cfg.delta);
  art.mmcs = ground_truth_mmcs(d.world, result.params.w_dec, cfg.delta);
  art.ortho_share =
      result.total_seconds > 0.0 ? result.ortho_seconds / result.total_seconds
                                 : 0.0;
  return art;
}

struct HeadlineRuns {
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::vector<SeedData> data;
  std::vector<RunArtifacts> baseline;
  std::vector<RunArtifacts> ort_c1;
  std::vector<RunArtifacts> ort_c4;
};

void criterion_5(HeadlineRuns& runs) {
  const auto start = Clock::now();
  bool pass = true;
  std::string detail;
  for (std::size_t i = 0; i < runs.seeds.size(); ++i) {
    runs.data.push_back(make_seed_data(runs.seeds[i]));
    const SeedData& d = runs.data.back();
    runs.baseline.push_back(run_experiment(d, 0.0, 1, 1, runs.seeds[i]));
    runs.ort_c1.push_back(run_experiment(d, 0.25, 1, 1, runs.seeds[i]));
    runs.ort_c4.push_back(run_experiment(d, 0.25, 4, 1, runs.seeds[i]));

    const RunArtifacts& base = runs.baseline.back();
    pass = pass && base.ev > 0.9;  // gamma=0 reference quality
    for (const RunArtifacts* ort : {&runs.ort_c1.back(), &runs.ort_c4.back()}) {
      pass = pass && ort->mcs <= 0.67 * base.mcs;
      pass = pass && ort->ev >= base.ev - 0.03;
    }
    detail += "seed " + std::to_string(runs.seeds[i]) + ": base ev=" +
              fmt(base.ev) + " mcs=" + fmt(base.mcs) + ", ort(c1) ev=" +
              fmt(runs.ort_c1.back().ev) + " mcs=" + fmt(runs.ort_c1.back().mcs) +
              ", ort(c4) ev=" + fmt(runs.ort_c4.back().ev) + " mcs=" +
              fmt(runs.ort_c4.back().mcs) + "; ";
  }
  const double secs = seconds_since(start);
  report(5, "scaled headline direction", pass && secs < 600.0, detail, secs);
}

void criterion_6(const HeadlineRuns& runs) {
  const auto start = Clock::now();
  bool pass = true;
  int mmcs_strictly_greater = 0;
  std::string detail;
  for (std::size_t i = 0; i < runs.seeds.size(); ++i) {
    const double comp_base =
        composition_rate(runs.baseline[i].params.w_dec, runs.seeds[i]).rate;
    const double comp_ort =
        composition_rate(runs.ort_c4[i].params.w_dec, runs.seeds[i]).rate;
    pass = pass && comp_ort < comp_base;
    pass = pass && runs.ort_c4[i].mmcs >= runs.baseline[i].mmcs - 0.02;
    if (runs.ort_c4[i].mmcs > runs.baseline[i].mmcs) ++mmcs_strictly_greater;
    detail += "seed " + std::to_string(runs.seeds[i]) + ": comp " +
              fmt(comp_ort) + "<" + fmt(comp_base) + ", mmcs " +
              fmt(runs.ort_c4[i].mmcs) + " vs " + fmt(runs.baseline[i].mmcs) +
              "; ";
  }
  pass = pass && mmcs_strictly_greater * 2 > static_cast<int>(runs.seeds.size());
  report(6, "composition proxy", pass, detail, seconds_since(start));
}

void criterion_7(const HeadlineRuns& runs) {
  const auto start = Clock::now();
  const SeedData& d = runs.data[0];
  RunArtifacts period5 = run_experiment(d, 0.25, 4, 5, runs.seeds[0]);
  const RunArtifacts& period1 = runs.ort_c4[0];
  const double rel_mcs =
      std::abs(period5.mcs - period1.mcs) / std::abs(period1.mcs);
  const bool pass = rel_mcs <= 0.25 &&
                    period5.ortho_share <= period1.ortho_share / 4.0;
  report(7, "periodic variant", pass,
         "mcs " + fmt(period5.mcs) + " vs " + fmt(period1.mcs) + " (rel " +
             fmt(rel_mcs) + "), ortho share " + fmt(period5.ortho_share) +
             " vs " + fmt(period1.ortho_share),
         seconds_since(start));
}

// ---------------------------------------------------------------------------
// Criterion 8: bitwise determinism of artifacts.

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void criterion_8() {
  const auto start = Clock::now();
  const auto root = std::filesystem::temp_directory_path() /
                    ("ortsae_accept_" + std::to_string(::getpid()));
  std::filesystem::remove_all(root);

  RngStream wrng = RngStream(42).split(100);
  WorldSpec spec;
  spec.dim_n = 16;
  spec.num_features = 32;
  spec.composite_pairs = 4;
  spec.hierarchy_links = 4;
  SyntheticWorld world = build_world(spec, wrng);
  RngStream srng = RngStream(42).split(101);
  Matrix data = sample_batch(world, 8192, srng).x;

  SaeConfig cfg;
  cfg.mode = ActivationMode::BatchTopK;
  cfg.k_sparsity = 4;
  cfg.gamma = 0.25;
  cfg.chunk_count = 2;
  cfg.alpha = 1.0 / 32.0;
  TrainConfig tc;
  tc.batch_size = 128;
  tc.total_steps = 300;
  tc.checkpoint_every = 100;
  tc.log_every = 50;
  tc.dead_window = 50;
  tc.seed = 4242;

  for (const char* run_name : {"a", "b"}) {
    MatrixBatchSource source(data, tc.seed);
    train(source, cfg, tc, 64, (root / run_name).string());
  }
  const bool pass =
      slurp((root / "a" / "checkpoint.bin").string()) ==
          slurp((root / "b" / "checkpoint.bin").string()) &&
      slurp((root / "a" / "metrics.csv").string()) ==
          slurp((root / "b" / "metrics.csv").string()) &&
      slurp((root / "a" / "ckpt_step200.bin").string()) ==
          slurp((root / "b" / "ckpt_step200.bin").string()) &&
      !slurp((root / "a" / "checkpoint.bin").string()).empty();
  report(8, "determinism", pass,
         "two runs, identical checkpoints and metric CSVs",
         seconds_since(start));
}

// ---------------------------------------------------------------------------
// Criterion 9: format robustness.

void put32(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

void criterion_9() {
  const auto start = Clock::now();
  const auto root = std::filesystem::temp_directory_path() /
                    ("ortsae_fixtures_" + std::to_string(::getpid()));
  std::filesystem::remove_all(root);
  std::filesystem::create_directories(root);
  bool pass = true;
  std::string detail;

  // Round-trip properties.
  RngStream rng(909);
  for (int trial = 0; trial < 25 && pass; ++trial) {
    const Index rows = 1 + static_cast<Index>(rng.next_below(40));
    const Index cols = 1 + static_cast<Index>(rng.next_below(16));
    Matrix x = oracles::random_matrix(rows, cols, rng, 4.0);
    const std::string path = (root / "rt.bin").string();
    write_activations(path, x);
    Matrix back = read_activations(path);
    for (Index i = 0; i < rows && pass; ++i) {
      for (Index j = 0; j < cols; ++j) {
        if (back(i, j) !=
            static_cast<double>(static_cast<float>(x(i, j)))) {
          pass = false;
          break;
        }
      }
    }
  }
  {
    RngStream prng(910);
    SaeParams p = SaeParams::init(6, 12, prng);
    nlohmann::json meta;
    meta["seed"] = 7;
    const std::string path = (root / "ck.bin").string();
    write_checkpoint(path, p, ActivationMode::TopK, meta);
    Checkpoint ck = read_checkpoint(path);
    pass = pass && ck.mode == ActivationMode::TopK && ck.metadata == meta &&
           ck.params.m() == 12 && ck.params.n() == 6;
  }
  if (!pass) detail += "round trip failed; ";

  // Ten corrupted fixtures, each expected to raise FormatError with the
  // documented class.
  struct Fixture {
    const char* name;
    std::string bytes;
    bool checkpoint;
    const char* expect;
  };
  std::vector<Fixture> fixtures;

  fixtures.push_back({"empty file", "", false, "magic"});

  std::string f2 = "SAEACT2";
  f2.push_back('\0');
  put32(f2, 1);
  put32(f2, 1);
  put32(f2, 0);
  fixtures.push_back({"wrong magic", f2, false, "bad magic"});

  std::string f3 = "SAEACT1";
  f3.push_back('\0');
  put32(f3, 3);
  fixtures.push_back({"truncated header", f3, false, "truncated"});

  std::string f4 = "SAEACT1";
  f4.push_back('\0');
  put32(f4, 100);
  put32(f4, 4);
  for (int i = 0; i < 10; ++i) put32(f4, 0x3f800000);
  fixtures.push_back(
      {"payload shorter than header", f4, false, "shorter than the header"});

  std::string f5 = "SAEACT1";
  f5.push_back('\0');
  put32(f5, 0xffffffffu);
  put32(f5, 0xffffffffu);
  fixtures.push_back({"dimension overflow", f5, false, "overflow"});

  std::string f6 = "SAEACT1";
  f6.push_back('\0');
  put32(f6, 1);
  put32(f6, 1);
  put32(f6, 0x3f800000);
  f6 += "junk";
  fixtures.push_back({"trailing bytes", f6, false, "trailing"});

  std::string f7 = "SAECKPTX";
  put32(f7, 1);
  put32(f7, 1);
  fixtures.push_back({"checkpoint wrong magic", f7, true, "bad magic"});

  auto ckpt_header = [&](std::uint32_t n, std::uint32_t m, char mode) {
    std::string s = "SAECKPT1";
    put32(s, n);
    put32(s, m);
    s.push_back(mode);
    return s;
  };

  std::string f8 = ckpt_header(2, 4, 9);
  for (int i = 0; i < 2 * 2 * 4 + 2 + 4; ++i) put32(f8, 0);
  put32(f8, 0);
  fixtures.push_back({"unknown mode tag", f8, true, "mode tag"});

  std::string f9 = ckpt_header(2, 4, 1);
  for (int i = 0; i < 5; ++i) put32(f9, 0);  // only a fragment of the weights
  fixtures.push_back({"truncated weights", f9, true, "exceeds file size"});

  std::string f10 = ckpt_header(2, 4, 1);
  for (int i = 0; i < 2 * 2 * 4 + 2 + 4; ++i) put32(f10, 0);
  put32(f10, 1000);  // metadata length beyond EOF
  f10 += "{}";
  fixtures.push_back({"metadata length beyond EOF", f10, true, "metadata"});

  int rejected = 0;
  for (const Fixture& fx : fixtures) {
    const std::string path = (root / "fixture.bin").string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(fx.bytes.data(), static_cast<std::streamsize>(fx.bytes.size()));
    out.close();
    try {
      if (fx.checkpoint) {
        read_checkpoint(path);
      } else {
        read_activations(path);
      }
      pass = false;
      detail += std::string(fx.name) + " was accepted; ";
    } catch (const FormatError& e) {
      ++rejected;
      if (std::string(e.what()).find(fx.expect) == std::string::npos) {
        pass = false;
        detail += std::string(fx.name) + " raised off-class error: " +
                  e.what() + "; ";
      }
    }
  }
  detail = std::to_string(rejected) + "/10 fixtures rejected. " + detail;
  report(9, "format robustness", pass && rejected == 10, detail,
         seconds_since(start));
}

}  // namespace

int main() {
  const auto start = Clock::now();
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  HeadlineRuns runs;
  criterion_5(runs);
  criterion_6(runs);
  criterion_7(runs);
  criterion_8();
  criterion_9();
  std::printf("%d/9 criteria passed [%.1fs total]\n", 9 - g_failures,
              seconds_since(start));
  return g_failures;
}
