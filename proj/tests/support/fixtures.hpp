#pragma once

#include <vector>

#include "mwr/backbone.hpp"
#include "mwr/data.hpp"
#include "mwr/eval.hpp"
#include "mwr/rng.hpp"

namespace testutil {

struct ShiftSamples {
  std::vector<mwr::Sample> source;
  std::vector<mwr::Sample> target;
  std::vector<bool> flipped;
};

/// Featurized synthetic shift. With no fillers every text is a single key,
/// so positives have identical pooled vectors and the rule is separable.
inline ShiftSamples shift_samples(std::uint64_t seed, std::size_t n_source, std::size_t n_target,
                                  double flip, std::size_t fillers = 0) {
  mwr::ShiftSpec spec;
  spec.source_size = n_source;
  spec.target_size = n_target;
  spec.min_fillers = 0;
  spec.max_fillers = fillers;
  spec.flip_fraction = flip;
  mwr::Rng rng(seed);
  const auto shift = mwr::gen_synthetic_shift(spec, rng);
  const auto emb = mwr::build_embedding(0, 4096, 16);
  return {mwr::featurize(shift.source, emb, 40), mwr::featurize(shift.target, emb, 40),
          shift.source_flipped};
}

inline mwr::Architecture shift_arch(mwr::BackboneKind kind = mwr::BackboneKind::mlp) {
  return {kind, 16, 32, 2, 16.0};
}

inline double accuracy_on(const mwr::ModelState& model, const std::vector<mwr::Sample>& data) {
  return mwr::accuracy(mwr::predict(model, data));
}

}  // namespace testutil
