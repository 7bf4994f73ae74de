#ifndef ORTSAE_ACTIVATION_IO_HPP
#define ORTSAE_ACTIVATION_IO_HPP

#include <string>

#include "ortsae/types.hpp"

namespace ortsae {

/// SAEACT1 container: magic "SAEACT1\0", n_rows and n_cols as 32-bit
/// little-endian unsigned, payload as 32-bit little-endian IEEE-754
/// row-major. Values are narrowed to 32-bit on write and widened on read.
void write_activations(const std::string& path, const Matrix& x);

/// Throws FormatError (naming the byte offset) on any malformed input.
Matrix read_activations(const std::string& path);

}  // namespace ortsae

#endif
