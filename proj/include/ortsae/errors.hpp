#ifndef ORTSAE_ERRORS_HPP
#define ORTSAE_ERRORS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ortsae {

/// Operand dimensions do not satisfy an operation's precondition.
class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration value violates its documented constraints.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Input data is insufficient or degenerate for the requested quantity
/// (too few rows, zero total variance, zero KL baseline, ...).
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A serialized file does not match its format; the message names the
/// byte offset at which the problem was detected.
class FormatError : public std::runtime_error {
public:
  FormatError(const std::string& what, std::uint64_t byte_offset)
      : std::runtime_error(what + " (at byte " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}

  std::uint64_t byte_offset() const { return byte_offset_; }

private:
  std::uint64_t byte_offset_;
};

/// Two artifacts that must come from the same evaluation disagree
/// (e.g. a replayed chunk partition that no longer matches the decoder).
class ConsistencyError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Training aborted: non-finite gradient or loss.
class TrainingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace ortsae

#endif
