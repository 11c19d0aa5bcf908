#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mwr/backbone.hpp"
#include "mwr/rng.hpp"

namespace mwr {

struct Dataset {
  std::string name;
  std::size_t class_count = 2;
  std::vector<Example> examples;

  std::size_t size() const noexcept { return examples.size(); }
  void validate() const;
};

std::vector<std::size_t> class_counts(const Dataset& ds);

// ---------------------------------------------------------------------------
// TSV: one `text_a<TAB>text_b<TAB>label` row per example, no header.

/// Reads a dataset. `class_count` of 0 infers max(label) + 1 (at least 2).
/// Throws IoError for unreadable files and ParseError naming the line for
/// malformed rows.
Dataset load_tsv(const std::filesystem::path& path, std::size_t class_count = 0);

/// Throws DataError if a text contains a tab or newline.
void write_tsv(const Dataset& ds, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Preprocessing

/// ASCII-lowercase, split on whitespace, strip leading and trailing ASCII
/// punctuation from each piece, drop empties, keep the first `max_len`.
std::vector<std::string> tokenize(std::string_view text, std::size_t max_len);

/// Every class reduced to the smallest class's count by seeded sampling
/// without replacement; the result is shuffled. Throws DomainError if a
/// class has no examples.
Dataset balance_downsample(const Dataset& ds, std::uint64_t seed);

struct FilterResult {
  Dataset dataset;
  std::size_t dropped = 0;
  std::vector<std::size_t> absent_labels;  // kept labels with no examples
};

/// Keeps examples whose label is in `keep` and remaps them through `relabel`.
/// An empty `relabel` maps `keep` in ascending order onto 0..|keep|-1.
/// A supplied mapping must cover `keep` and be a bijection onto 0..|keep|-1.
FilterResult filter_labels(const Dataset& ds, const std::vector<std::size_t>& keep,
                           const std::map<std::size_t, std::size_t>& relabel = {});

struct FewShotSpec {
  std::size_t k = 10;
  std::uint64_t seed = 0;
};

struct FewShotSplit {
  Dataset few_shot;
  Dataset remainder;
  std::vector<std::size_t> selected;  // indices into the input, ascending
};

/// k examples of each class drawn without replacement. Both outputs keep the
/// input order. Throws DomainError naming the first short class.
FewShotSplit sample_few_shot(const Dataset& ds, const FewShotSpec& spec);

// ---------------------------------------------------------------------------
// Synthetic source/target pairs with a controlled shift.
//
// Every text is a bag of filler tokens plus one key token. A pair is
// positive when both texts carry the same key. Target fillers come from the
// target vocabulary; source fillers mix shared and source-only words. In the
// source, a `flip_fraction` share of the (positive, negative) pairs has its
// labels inverted.

struct ShiftSpec {
  std::size_t source_size = 2000;
  std::size_t target_size = 2000;
  std::size_t key_count = 16;
  std::size_t target_vocab = 200;
  std::size_t source_vocab = 200;
  double vocab_overlap = 0.5;  // share of source fillers drawn from target words
  std::size_t min_fillers = 2;
  std::size_t max_fillers = 6;
  double flip_fraction = 0.0;

  void validate() const;
};

struct SyntheticShift {
  Dataset source;
  Dataset target;
  std::vector<bool> source_flipped;  // per source example
};

SyntheticShift gen_synthetic_shift(const ShiftSpec& spec, Rng& rng);

// ---------------------------------------------------------------------------

std::vector<Sample> featurize(const Dataset& ds, const EmbeddingTable& emb,
                              std::size_t max_len);

}  // namespace mwr
