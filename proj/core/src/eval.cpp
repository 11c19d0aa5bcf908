#include "mwr/eval.hpp"

#include <cstdint>
#include <cstdlib>

#include "mwr/errors.hpp"

namespace mwr {

void PredictionRecord::validate() const {
  require_same_length(predicted.size(), truth.size(), "prediction record");
}

PredictionRecord predict(const ModelState& model, std::span<const Sample> data) {
  PredictionRecord rec;
  rec.predicted.reserve(data.size());
  rec.truth.reserve(data.size());
  for (const Sample& s : data) {
    rec.predicted.push_back(predict_class(model, s.features));
    rec.truth.push_back(s.label);
  }
  return rec;
}

double accuracy(const PredictionRecord& preds) {
  preds.validate();
  if (preds.size() == 0) throw DomainError("accuracy: empty prediction record");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds.predicted[i] == preds.truth[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double permutation_test(const PredictionRecord& a, const PredictionRecord& b,
                        std::size_t n_perm, Rng& rng) {
  a.validate();
  b.validate();
  if (a.truth != b.truth) {
    throw DomainError("permutation_test: records cover different examples");
  }
  if (n_perm == 0) throw DomainError("permutation_test: n_perm must be >= 1");

  // Only discordant examples move the statistic; each contributes +-1 to the
  // difference in correct counts. Work in integer counts to avoid ties
  // decided by rounding.
  std::vector<int> diff;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int ca = a.predicted[i] == a.truth[i] ? 1 : 0;
    const int cb = b.predicted[i] == b.truth[i] ? 1 : 0;
    if (ca != cb) diff.push_back(ca - cb);
  }
  long observed = 0;
  for (int d : diff) observed += d;
  observed = std::labs(observed);

  // A swap flips the sign of d_i, so the permuted sum is
  // sum(d_i) - 2 * sum(d_i over swapped i). Swaps come 64 per draw.
  std::size_t exceed = 0;
  for (std::size_t p = 0; p < n_perm; ++p) {
    long total = 0;
    for (std::size_t start = 0; start < diff.size(); start += 64) {
      const std::uint64_t bits = rng.next_u64();
      const std::size_t end = std::min(diff.size(), start + 64);
      for (std::size_t i = start; i < end; ++i) {
        const bool swap = (bits >> (i - start)) & 1U;
        total += swap ? -diff[i] : diff[i];
      }
    }
    if (std::labs(total) >= observed) ++exceed;
  }
  return static_cast<double>(1 + exceed) / static_cast<double>(1 + n_perm);
}

}  // namespace mwr
