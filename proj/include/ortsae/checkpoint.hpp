#ifndef ORTSAE_CHECKPOINT_HPP
#define ORTSAE_CHECKPOINT_HPP

#include <string>

#include <json.hpp>

#include "ortsae/sae.hpp"
#include "ortsae/types.hpp"

namespace ortsae {

/// SAECKPT1 container: magic, n and m as 32-bit little-endian unsigned, a
/// mode tag byte, the four parameter blocks as 32-bit little-endian IEEE-754
/// row-major, then a length-prefixed UTF-8 JSON metadata blob.
struct Checkpoint {
  SaeParams params;  // widened to 64-bit on load
  ActivationMode mode = ActivationMode::BatchTopK;
  nlohmann::json metadata;
};

void write_checkpoint(const std::string& path, const SaeParams& params,
                      ActivationMode mode, const nlohmann::json& metadata);

/// Throws FormatError (naming the byte offset) on any malformed input.
Checkpoint read_checkpoint(const std::string& path);

}  // namespace ortsae

#endif
