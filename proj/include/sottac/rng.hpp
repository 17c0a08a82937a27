#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace sottac {

/// Named substreams derived from a run seed.
enum class Stream : std::uint64_t {
  Environment = 1,
  Action = 2,
  Init = 3,
  Diagnostics = 4,
  Oracle = 5,
};

/// Deterministic generator: std::mt19937_64 seeded through SplitMix64.
///
/// The engine output sequence is fixed by the C++ standard. Uniform and normal
/// variates are produced here rather than by <random> distributions, whose
/// algorithms are implementation-defined, so sequences are reproducible across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream for (seed, stream) pairs.
  static Rng derive(std::uint64_t seed, Stream stream);
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via the Marsaglia polar method.
  double normal();
  /// Draw an index with the given (normalized) probabilities.
  std::size_t categorical(std::span<const double> probs);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace sottac
