#ifndef ORTSAE_CONFIG_JSON_HPP
#define ORTSAE_CONFIG_JSON_HPP

#include <set>
#include <string>

#include <json.hpp>

#include "ortsae/errors.hpp"
#include "ortsae/sae.hpp"
#include "ortsae/trainer.hpp"

namespace ortsae {

/// Flat key/value document mirroring the SaeConfig and TrainConfig fields,
/// plus the latent count m. This is both the CLI configuration format and
/// the config echo stored in checkpoint metadata.
inline nlohmann::json config_to_json(const SaeConfig& sae,
                                     const TrainConfig& train, Index m) {
  nlohmann::json j;
  j["mode"] = to_string(sae.mode);
  j["m"] = m;
  j["k_sparsity"] = sae.k_sparsity;
  j["lambda"] = sae.lambda;
  j["alpha"] = sae.alpha;
  j["gamma"] = sae.gamma;
  j["delta"] = sae.delta;
  j["chunk_count"] = sae.chunk_count;
  j["penalty_period"] = sae.penalty_period;
  j["aux_k"] = sae.aux_k;
  j["learning_rate"] = train.learning_rate;
  j["batch_size"] = train.batch_size;
  j["total_steps"] = train.total_steps;
  j["adam_beta1"] = train.adam_beta1;
  j["adam_beta2"] = train.adam_beta2;
  j["adam_eps"] = train.adam_eps;
  j["weight_decay"] = train.weight_decay;
  j["dead_window"] = train.dead_window;
  j["seed"] = train.seed;
  j["checkpoint_every"] = train.checkpoint_every;
  j["log_every"] = train.log_every;
  return j;
}

/// Parses the flat document into the two configs. Unknown keys are errors;
/// absent keys keep the defaults already present in sae/train. m is required
/// unless require_m is false (checkpoint echoes always carry it).
inline void config_from_json(const nlohmann::json& j, SaeConfig& sae,
                             TrainConfig& train, Index& m,
                             bool require_m = true) {
  static const std::set<std::string> known = {
      "mode",          "m",          "k_sparsity",     "lambda",
      "alpha",         "gamma",      "delta",          "chunk_count",
      "penalty_period", "aux_k",     "learning_rate",  "batch_size",
      "total_steps",   "adam_beta1", "adam_beta2",     "adam_eps",
      "weight_decay",  "dead_window", "seed",          "checkpoint_every",
      "log_every"};
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw ConfigError("unknown config key \"" + item.key() + "\"");
    }
  }
  auto take = [&](const char* key, auto& out) {
    if (!j.contains(key)) return;
    try {
      out = j.at(key).template get<std::decay_t<decltype(out)>>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string(key) + ": wrong JSON type");
    }
  };
  std::string mode_name = to_string(sae.mode);
  take("mode", mode_name);
  sae.mode = activation_mode_from_string(mode_name);
  take("k_sparsity", sae.k_sparsity);
  take("lambda", sae.lambda);
  take("alpha", sae.alpha);
  take("gamma", sae.gamma);
  take("delta", sae.delta);
  take("chunk_count", sae.chunk_count);
  take("penalty_period", sae.penalty_period);
  take("aux_k", sae.aux_k);
  take("learning_rate", train.learning_rate);
  take("batch_size", train.batch_size);
  take("total_steps", train.total_steps);
  take("adam_beta1", train.adam_beta1);
  take("adam_beta2", train.adam_beta2);
  take("adam_eps", train.adam_eps);
  take("weight_decay", train.weight_decay);
  take("dead_window", train.dead_window);
  take("seed", train.seed);
  take("checkpoint_every", train.checkpoint_every);
  take("log_every", train.log_every);
  if (j.contains("m")) {
    take("m", m);
  } else if (require_m) {
    throw ConfigError("m: required config key is missing");
  }
}

}  // namespace ortsae

#endif
