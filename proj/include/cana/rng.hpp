#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace cana::num {

/// Deterministic, splittable random stream. The generator is a hand-rolled
/// xoshiro256** seeded via splitmix64 so that streams are bit-reproducible
/// across platforms and standard-library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Derive an independent stream from this one's seed and a label. The
  /// parent stream is not advanced.
  Rng split(std::string_view label) const;
  Rng split(std::uint64_t salt) const;

  std::uint64_t next_u64();

  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller (no cached spare).
  double normal();

  /// Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n);

  std::vector<std::size_t> permutation(std::size_t n);

  /// First k elements of a random permutation of [0, n).
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k);

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

}  // namespace cana::num
