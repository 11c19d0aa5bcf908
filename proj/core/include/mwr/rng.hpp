#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include "mwr/linalg.hpp"

namespace mwr {

/// xoshiro256** seeded through SplitMix64. The algorithm is fixed so that a
/// seed yields the same stream on every platform; nothing here touches the
/// implementation-defined std:: distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() noexcept;

  /// Uniform double in [lo, hi). Throws DomainError unless lo < hi.
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n) without modulo bias. n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Independent generator derived from this one's seed and `stream`.
  /// Does not advance this generator.
  Rng fork(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// n draws from [lo, hi). Throws DomainError if lo >= hi or n == 0.
RealVector sample_uniform(Rng& rng, double lo, double hi, std::size_t n);

/// Fisher-Yates shuffle driven by `rng`.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace mwr
