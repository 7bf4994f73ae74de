#ifndef ORTSAE_RNG_HPP
#define ORTSAE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ortsae {

/// Splittable counter-based random stream.
///
/// Output i is a pure function of (seed, i), so replaying a stream from any
/// recorded position reproduces the same sequence bit for bit, on every
/// platform. Substreams derived with split() are decorrelated from the parent
/// and from each other, which lets each training step draw its chunk
/// partition from (seed, step) without shared mutable state.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed, std::uint64_t position = 0)
      : seed_(seed), position_(position) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return position_; }

  std::uint64_t next_u64() {
    // splitmix64 with an explicit counter.
    std::uint64_t z = seed_ + (position_ + 1) * 0x9e3779b97f4a7c15ull;
    ++position_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 bits of randomness.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  /// Uniform in [0, bound); bound == 0 yields 0.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) return 0;
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  /// Standard normal via Box-Muller; consumes exactly two draws.
  double next_gaussian() {
    // u1 in (0, 1] so the log stays finite.
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Derive an independent substream; does not advance this stream.
  RngStream split(std::uint64_t stream_id) const {
    std::uint64_t z = seed_ ^ ((stream_id + 1) * 0xd6e8feb86659fd93ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return RngStream(z ^ (z >> 31), 0);
  }

private:
  std::uint64_t seed_;
  std::uint64_t position_;
};

}  // namespace ortsae

#endif
