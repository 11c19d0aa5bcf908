#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mwr/backbone.hpp"
#include "mwr/rng.hpp"

namespace mwr {

struct PredictionRecord {
  std::vector<std::size_t> predicted;
  std::vector<std::size_t> truth;

  std::size_t size() const noexcept { return truth.size(); }
  void validate() const;
};

PredictionRecord predict(const ModelState& model, std::span<const Sample> data);

/// Fraction of correct predictions. Throws DomainError when empty.
double accuracy(const PredictionRecord& preds);

inline constexpr std::size_t kDefaultPermutations = 10000;

/// Two-sided paired permutation test on per-example correctness.
///
/// Statistic |acc_a - acc_b|. Each permutation swaps the two methods'
/// outcomes on every example independently with probability 1/2. Returns
/// (1 + #{permuted >= observed}) / (1 + n_perm), so never 0. The records
/// must share their truth vector.
double permutation_test(const PredictionRecord& a, const PredictionRecord& b,
                        std::size_t n_perm, Rng& rng);

}  // namespace mwr
