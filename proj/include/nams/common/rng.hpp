#pragma once

#include <cstdint>
#include <string_view>

namespace nams {

/// SplitMix64 finalizer, used to derive seeds for child streams.
std::uint64_t splitmix64(std::uint64_t x);

/// Stable 64-bit FNV-1a hash of a string; used to name child streams.
std::uint64_t hash_name(std::string_view name);

/// PCG32 (XSH-RR, 64-bit state) with portable distributions.
///
/// Every distribution here is implemented in-house so that a seed produces
/// the same values with every compiler and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). n must be > 0.
  std::uint32_t below(std::uint32_t n);
  /// Uniform integer in [lo, hi] inclusive.
  int between(int lo, int hi);
  /// Standard normal via Box-Muller.
  double normal();
  bool bernoulli(double p);

  /// Independent child stream derived from this generator's seed and a tag.
  /// Does not advance this generator.
  Rng split(std::uint64_t tag) const;
  Rng split(std::string_view tag) const { return split(hash_name(tag)); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace nams
