#ifndef SANDPILE_RNG_HPP
#define SANDPILE_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace sandpile {

/// Seed of the stream named (master, label, replica). Stable across platforms.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t replica = 0);

/// Deterministic, named random stream.
///
/// Every stochastic routine takes one of these; identical (seed, label,
/// replica) triples give bit-identical draws. Variates are built from raw
/// engine output so results do not depend on the standard library's
/// distribution implementations.
class RandomStream {
 public:
  RandomStream(std::uint64_t master, std::string_view label, std::uint64_t replica = 0)
      : seed_(derive_seed(master, label, replica)), engine_(seed_) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t bits() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }
  /// Uniform integer in [0, bound).
  std::uint32_t below(std::uint32_t bound) {
    return static_cast<std::uint32_t>(((engine_() >> 32) * bound) >> 32);
  }
  double exponential();
  double normal();

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace sandpile

#endif  // SANDPILE_RNG_HPP
