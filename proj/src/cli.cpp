#include "ortsae/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ortsae/activation_io.hpp"
#include "ortsae/checkpoint.hpp"
#include "ortsae/config_json.hpp"
#include "ortsae/datagen.hpp"
#include "ortsae/errors.hpp"
#include "ortsae/metasae.hpp"
#include "ortsae/metrics.hpp"
#include "ortsae/trainer.hpp"

namespace ortsae {

namespace {

constexpr std::uint64_t kWorldStream = 7;
constexpr std::uint64_t kSampleStream = 8;

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw DataError("cannot open \"" + path + "\" for writing");
  out << text;
}

std::uint64_t seed_override_or(std::uint64_t fallback) {
  const char* env = std::getenv("ORTSAE_SEED");
  if (env == nullptr || *env == '\0') return fallback;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0') {
    throw ConfigError("ORTSAE_SEED: not a valid unsigned integer");
  }
  return static_cast<std::uint64_t>(v);
}

struct GenDataArgs {
  std::string out;
  std::uint64_t seed = 0;
  Index rows = 65536;
  WorldSpec spec;
};

int run_gen_data(const GenDataArgs& args) {
  std::filesystem::create_directories(args.out);
  RngStream base(args.seed);
  RngStream world_rng = base.split(kWorldStream);
  SyntheticWorld world = build_world(args.spec, world_rng);
  write_world(args.out + "/world.json", world);

  RngStream sample_rng = base.split(kSampleStream);
  SampleResult sample = sample_batch(world, args.rows, sample_rng);
  write_activations(args.out + "/activations.bin", sample.x);
  std::cout << args.out << "/world.json\n" << args.out << "/activations.bin\n";
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
};

int run_train(const TrainArgs& args) {
  std::ifstream in(args.config);
  if (!in) throw ConfigError("config: cannot open \"" + args.config + "\"");
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    throw ConfigError("config: file is not valid JSON");
  }
  SaeConfig cfg;
  TrainConfig tc;
  Index m = 0;
  config_from_json(doc, cfg, tc, m);
  tc.seed = seed_override_or(tc.seed);

  Matrix data = read_activations(args.data);
  cfg.validate(m);
  tc.validate();
  MatrixBatchSource source(std::move(data), tc.seed);
  TrainResult result = train(source, cfg, tc, m, args.out);
  std::cout << args.out << "/checkpoint.bin\n" << args.out << "/metrics.csv\n";
  (void)result;
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string world;
  std::string out;
  std::string dump;
};

// Forward the checkpoint's own mode/config over the data in training-sized
// batches; the last partial batch keeps its own BatchTopK budget.
struct EvalPass {
  Matrix recon;
  double actual_l0 = 0.0;
};

EvalPass eval_forward(const SaeParams& params, const SaeConfig& cfg,
                      Index batch_size, const Matrix& data) {
  EvalPass pass;
  pass.recon.resize(data.rows(), data.cols());
  std::uint64_t active = 0;
  for (Index start = 0; start < data.rows(); start += batch_size) {
    const Index rows = std::min(batch_size, data.rows() - start);
    const Matrix x = data.middleRows(start, rows);
    ForwardTrace trace = forward(params, cfg, x);
    pass.recon.middleRows(start, rows) = trace.recon;
    active += static_cast<std::uint64_t>(trace.active_mask.count());
  }
  pass.actual_l0 =
      static_cast<double>(active) / static_cast<double>(data.rows());
  return pass;
}

const std::vector<double> kClusteringThresholds = {0.1, 0.2, 0.3, 0.4, 0.5,
                                                   0.6, 0.7, 0.8, 0.9, 0.95};

int run_eval(const EvalArgs& args) {
  Checkpoint ck = read_checkpoint(args.checkpoint);
  SaeConfig cfg;
  TrainConfig tc;
  Index m = ck.params.m();
  if (ck.metadata.contains("config")) {
    config_from_json(ck.metadata.at("config"), cfg, tc, m,
                     /*require_m=*/false);
  }
  cfg.mode = ck.mode;
  Matrix data = read_activations(args.data);
  if (data.cols() != ck.params.n()) {
    throw ShapeError("data: width " + std::to_string(data.cols()) +
                     " does not match checkpoint input dimension " +
                     std::to_string(ck.params.n()));
  }

  EvalPass pass = eval_forward(ck.params, cfg, tc.batch_size, data);

  std::string report = "metric,value\n";
  report += "explained_variance," +
            fmt_g(explained_variance(data, pass.recon)) + "\n";
  report += "actual_l0," + fmt_g(pass.actual_l0) + "\n";
  report += "mean_cos_sim," + fmt_g(mean_cos_sim(ck.params.w_dec, cfg.delta)) +
            "\n";
  if (!args.world.empty()) {
    SyntheticWorld world = read_world(args.world);
    report += "ground_truth_mmcs," +
              fmt_g(ground_truth_mmcs(world, ck.params.w_dec, cfg.delta)) +
              "\n";
  }
  const auto clustering = clustering_coefficient(
      ck.params.w_dec, kClusteringThresholds, cfg.delta);
  for (std::size_t i = 0; i < clustering.size(); ++i) {
    const std::string tag = fmt_g(kClusteringThresholds[i]);
    report += "clustering_density@" + tag + "," +
              fmt_g(clustering[i].first) + "\n";
    report += "clustering_coefficient@" + tag + "," +
              fmt_g(clustering[i].second) + "\n";
  }

  std::cout << report;
  if (!args.out.empty()) write_text(args.out, report);
  if (!args.dump.empty()) {
    const Vector nearest = nearest_cosines(ck.params.w_dec, cfg.delta);
    std::string dump = "feature_id,max_cos\n";
    for (Index i = 0; i < nearest.size(); ++i) {
      dump += std::to_string(i) + "," + fmt_g(nearest(i)) + "\n";
    }
    write_text(args.dump, dump);
  }
  return 0;
}

struct MetasaeArgs {
  std::string checkpoint;
  std::uint64_t seed = 0;
  Index steps = 2000;
  std::string out;
  std::string report;
};

int run_metasae(const MetasaeArgs& args) {
  Checkpoint ck = read_checkpoint(args.checkpoint);
  MetaBudget budget;
  budget.steps = args.steps;
  CompositionResult result =
      composition_rate(ck.params.w_dec, args.seed, budget);
  std::cout << fmt_g(result.rate) << "\n";
  if (!args.report.empty()) {
    write_text(args.report, "composition_rate," + fmt_g(result.rate) + "\n");
  }
  if (!args.out.empty()) {
    nlohmann::json meta;
    meta["kind"] = "metasae";
    meta["seed"] = args.seed;
    meta["steps"] = args.steps;
    meta["rate"] = result.rate;
    write_checkpoint(args.out, result.meta_params, ActivationMode::BatchTopK,
                     meta);
  }
  return 0;
}

struct DecomposeArgs {
  std::string a;
  std::string b;
  std::string out;
  Index max_atoms = 5;
  double cos_accept = 0.95;
  double coef_min = 0.1;
};

int run_decompose(const DecomposeArgs& args) {
  Checkpoint ca = read_checkpoint(args.a);
  Checkpoint cb = read_checkpoint(args.b);
  if (ca.params.n() != cb.params.n()) {
    throw ShapeError("checkpoints live in different input spaces");
  }
  std::string csv = "feature_id,cosine,atom_id,coefficient\n";
  Index accepted = 0;
  for (Index i = 0; i < ca.params.m(); ++i) {
    auto dec = decompose_feature(ca.params.w_dec.col(i), cb.params.w_dec,
                                 args.max_atoms, args.cos_accept,
                                 args.coef_min);
    if (!dec) continue;
    ++accepted;
    for (std::size_t a = 0; a < dec->atoms.size(); ++a) {
      csv += std::to_string(i) + "," + fmt_g(dec->cosine) + "," +
             std::to_string(dec->atoms[a]) + "," +
             fmt_g(dec->coefficients(static_cast<Index>(a))) + "\n";
    }
  }
  std::cout << "accepted," << accepted << "\n";
  if (!args.out.empty()) write_text(args.out, csv);
  return 0;
}

struct CompareArgs {
  std::string a;
  std::string b;
  double threshold = 0.2;
  double delta = 1e-8;
  std::string out;
};

int run_compare(const CompareArgs& args) {
  Checkpoint ca = read_checkpoint(args.a);
  Checkpoint cb = read_checkpoint(args.b);
  const double fraction = unique_features(ca.params.w_dec, cb.params.w_dec,
                                          args.threshold, args.delta);
  std::cout << fmt_g(fraction) << "\n";
  if (!args.out.empty()) {
    write_text(args.out, "unique_fraction," + fmt_g(fraction) + "\n");
  }
  return 0;
}

}  // namespace

int cli_run(int argc, const char* const* argv) {
  CLI::App app{"OrtSAE training and analysis toolkit"};
  app.require_subcommand(1);

  GenDataArgs gen;
  CLI::App* gen_cmd =
      app.add_subcommand("gen-data", "write a synthetic world and activations");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "rng seed");
  gen_cmd->add_option("--rows", gen.rows, "number of samples");
  gen_cmd->add_option("--dim", gen.spec.dim_n, "activation dimension");
  gen_cmd->add_option("--features", gen.spec.num_features, "atomic features");
  gen_cmd->add_option("--fire-prob", gen.spec.fire_prob, "base firing rate");
  gen_cmd->add_option("--pairs", gen.spec.composite_pairs, "composite pairs");
  gen_cmd->add_option("--co-fire-prob", gen.spec.co_fire_prob,
                      "pair coupling probability");
  gen_cmd->add_option("--hier", gen.spec.hierarchy_links,
                      "parent/child links");
  gen_cmd->add_option("--cond-prob", gen.spec.conditional_prob,
                      "child conditional firing probability");
  gen_cmd->add_option("--mag-lo", gen.spec.magnitude_lo, "magnitude lower bound");
  gen_cmd->add_option("--mag-hi", gen.spec.magnitude_hi, "magnitude upper bound");

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "train an SAE");
  train_cmd->add_option("--config", tr.config, "JSON config file")->required();
  train_cmd->add_option("--data", tr.data, "activation file")->required();
  train_cmd->add_option("--out", tr.out, "output directory")->required();

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint file")
      ->required();
  eval_cmd->add_option("--data", ev.data, "activation file")->required();
  eval_cmd->add_option("--world", ev.world, "world JSON for ground-truth MMCS");
  eval_cmd->add_option("--out", ev.out, "report CSV path");
  eval_cmd->add_option("--dump", ev.dump, "per-feature nearest-cosine CSV path");

  MetasaeArgs ms;
  CLI::App* meta_cmd =
      app.add_subcommand("metasae", "composition rate via a secondary SAE");
  meta_cmd->add_option("--checkpoint", ms.checkpoint, "checkpoint file")
      ->required();
  meta_cmd->add_option("--seed", ms.seed, "rng seed");
  meta_cmd->add_option("--steps", ms.steps, "meta-training steps");
  meta_cmd->add_option("--out", ms.out, "meta checkpoint path");
  meta_cmd->add_option("--report", ms.report, "report CSV path");

  DecomposeArgs dc;
  CLI::App* dec_cmd = app.add_subcommand(
      "decompose", "express checkpoint A's features in B's dictionary");
  dec_cmd->add_option("--a", dc.a, "checkpoint to decompose")->required();
  dec_cmd->add_option("--b", dc.b, "dictionary checkpoint")->required();
  dec_cmd->add_option("--out", dc.out, "decompositions CSV path");
  dec_cmd->add_option("--max-atoms", dc.max_atoms, "atom budget");
  dec_cmd->add_option("--cos-accept", dc.cos_accept, "acceptance cosine");
  dec_cmd->add_option("--coef-min", dc.coef_min, "minimum coefficient");

  CompareArgs cp;
  CLI::App* cmp_cmd =
      app.add_subcommand("compare", "unique-feature fraction of A against B");
  cmp_cmd->add_option("--a", cp.a, "checkpoint A")->required();
  cmp_cmd->add_option("--b", cp.b, "checkpoint B")->required();
  cmp_cmd->add_option("--threshold", cp.threshold, "uniqueness threshold");
  cmp_cmd->add_option("--delta", cp.delta, "cosine clamp");
  cmp_cmd->add_option("--out", cp.out, "report CSV path");

  try {
    app.parse(argc, argv);
    if (gen_cmd->parsed()) return run_gen_data(gen);
    if (train_cmd->parsed()) return run_train(tr);
    if (eval_cmd->parsed()) return run_eval(ev);
    if (meta_cmd->parsed()) return run_metasae(ms);
    if (dec_cmd->parsed()) return run_decompose(dc);
    if (cmp_cmd->parsed()) return run_compare(cp);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ortsae
