#include "mwr/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mwr/errors.hpp"

namespace mwr {

void Dataset::validate() const {
  if (class_count < 2) throw DataError("dataset '" + name + "': class_count must be >= 2");
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].label >= class_count) {
      throw DataError("dataset '" + name + "': example " + std::to_string(i) + " has label " +
                      std::to_string(examples[i].label) + " >= class_count " +
                      std::to_string(class_count));
    }
  }
}

std::vector<std::size_t> class_counts(const Dataset& ds) {
  std::vector<std::size_t> counts(ds.class_count, 0);
  for (const auto& ex : ds.examples) {
    if (ex.label < counts.size()) ++counts[ex.label];
  }
  return counts;
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool is_ascii_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

}  // namespace

Dataset load_tsv(const std::filesystem::path& path, std::size_t class_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");

  Dataset ds;
  ds.name = path.stem().string();
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_label = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw ParseError(path.string() + ": expected 3 tab-separated fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    std::size_t label = 0;
    const auto lf = fields[2];
    const auto [ptr, ec] = std::from_chars(lf.data(), lf.data() + lf.size(), label);
    if (ec != std::errc() || ptr != lf.data() + lf.size() || lf.empty()) {
      throw ParseError(path.string() + ": label '" + std::string(lf) +
                           "' is not a non-negative integer",
                       line_no);
    }
    max_label = std::max(max_label, label);
    ds.examples.push_back({std::string(fields[0]), std::string(fields[1]), label});
  }
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");

  ds.class_count = class_count == 0 ? std::max<std::size_t>(2, max_label + 1) : class_count;
  ds.validate();
  return ds;
}

void write_tsv(const Dataset& ds, const std::filesystem::path& path) {
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    const auto& ex = ds.examples[i];
    for (const std::string* t : {&ex.text_a, &ex.text_b}) {
      if (t->find_first_of("\t\n\r") != std::string::npos) {
        throw DataError("example " + std::to_string(i) +
                        ": tab or newline inside text cannot be written as TSV");
      }
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& ex : ds.examples) {
    out << ex.text_a << '\t' << ex.text_b << '\t' << ex.label << '\n';
  }
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

std::vector<std::string> tokenize(std::string_view text, std::size_t max_len) {
  if (max_len == 0) throw DomainError("tokenize: max_len must be >= 1");
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size() && tokens.size() < max_len) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t lo = i;
    std::size_t hi = j;
    while (lo < hi && is_ascii_punct(text[lo])) ++lo;
    while (hi > lo && is_ascii_punct(text[hi - 1])) --hi;
    if (lo < hi) {
      std::string tok(text.substr(lo, hi - lo));
      for (char& c : tok) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
      tokens.push_back(std::move(tok));
    }
    i = j;
  }
  return tokens;
}

Dataset balance_downsample(const Dataset& ds, std::uint64_t seed) {
  ds.validate();
  std::vector<std::vector<std::size_t>> by_class(ds.class_count);
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    by_class[ds.examples[i].label].push_back(i);
  }
  std::size_t target = ds.examples.size();
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].empty()) {
      throw DomainError("balance_downsample: class " + std::to_string(c) + " has no examples");
    }
    target = std::min(target, by_class[c].size());
  }

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  chosen.reserve(target * by_class.size());
  for (auto& idx : by_class) {
    shuffle(std::span<std::size_t>(idx), rng);
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(target));
  }
  shuffle(std::span<std::size_t>(chosen), rng);

  Dataset out{ds.name, ds.class_count, {}};
  out.examples.reserve(chosen.size());
  for (std::size_t i : chosen) out.examples.push_back(ds.examples[i]);
  return out;
}

FilterResult filter_labels(const Dataset& ds, const std::vector<std::size_t>& keep,
                           const std::map<std::size_t, std::size_t>& relabel) {
  if (keep.empty()) throw ConfigError("filter_labels: keep set is empty");
  const std::set<std::size_t> keep_set(keep.begin(), keep.end());

  std::map<std::size_t, std::size_t> mapping;
  if (relabel.empty()) {
    std::size_t next = 0;
    for (std::size_t label : keep_set) mapping[label] = next++;
  } else {
    std::set<std::size_t> images;
    for (std::size_t label : keep_set) {
      const auto it = relabel.find(label);
      if (it == relabel.end()) {
        throw ConfigError("filter_labels: relabel mapping misses kept label " +
                          std::to_string(label));
      }
      if (it->second >= keep_set.size() || !images.insert(it->second).second) {
        throw ConfigError("filter_labels: relabel mapping must be a bijection onto 0.." +
                          std::to_string(keep_set.size() - 1));
      }
      mapping[label] = it->second;
    }
  }

  FilterResult result;
  result.dataset.name = ds.name;
  result.dataset.class_count = std::max<std::size_t>(2, keep_set.size());
  std::set<std::size_t> seen;
  for (const auto& ex : ds.examples) {
    const auto it = mapping.find(ex.label);
    if (it == mapping.end()) {
      ++result.dropped;
      continue;
    }
    seen.insert(ex.label);
    result.dataset.examples.push_back({ex.text_a, ex.text_b, it->second});
  }
  for (std::size_t label : keep_set) {
    if (!seen.contains(label)) result.absent_labels.push_back(label);
  }
  return result;
}

FewShotSplit sample_few_shot(const Dataset& ds, const FewShotSpec& spec) {
  ds.validate();
  if (spec.k == 0) throw DomainError("sample_few_shot: k must be >= 1");
  std::vector<std::vector<std::size_t>> by_class(ds.class_count);
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    by_class[ds.examples[i].label].push_back(i);
  }
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].size() < spec.k) {
      throw DomainError("sample_few_shot: class " + std::to_string(c) + " has " +
                        std::to_string(by_class[c].size()) + " examples, need " +
                        std::to_string(spec.k));
    }
  }

  Rng rng(spec.seed);
  std::vector<bool> picked(ds.examples.size(), false);
  for (auto& idx : by_class) {
    shuffle(std::span<std::size_t>(idx), rng);
    for (std::size_t j = 0; j < spec.k; ++j) picked[idx[j]] = true;
  }

  FewShotSplit split;
  split.few_shot = {ds.name + "-fewshot", ds.class_count, {}};
  split.remainder = {ds.name + "-rest", ds.class_count, {}};
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    if (picked[i]) {
      split.selected.push_back(i);
      split.few_shot.examples.push_back(ds.examples[i]);
    } else {
      split.remainder.examples.push_back(ds.examples[i]);
    }
  }
  return split;
}

void ShiftSpec::validate() const {
  if (source_size < 2 || source_size % 2 != 0) {
    throw ConfigError("shift: source_size must be even and >= 2");
  }
  if (target_size < 2 || target_size % 2 != 0) {
    throw ConfigError("shift: target_size must be even and >= 2");
  }
  if (key_count < 2) throw ConfigError("shift: key_count must be >= 2");
  if (target_vocab == 0 || source_vocab == 0) {
    throw ConfigError("shift: filler vocabularies must be non-empty");
  }
  if (!(vocab_overlap >= 0.0 && vocab_overlap <= 1.0)) {
    throw ConfigError("shift: vocab_overlap must lie in [0, 1]");
  }
  if (min_fillers > max_fillers) throw ConfigError("shift: min_fillers > max_fillers");
  if (!(flip_fraction >= 0.0 && flip_fraction <= 1.0)) {
    throw ConfigError("shift: flip_fraction must lie in [0, 1]");
  }
}

namespace {

struct Domain {
  const ShiftSpec& spec;
  bool is_source;

  std::string filler(Rng& rng) const {
    if (is_source && rng.uniform01() >= spec.vocab_overlap) {
      return "s" + std::to_string(rng.below(spec.source_vocab));
    }
    return "t" + std::to_string(rng.below(spec.target_vocab));
  }

  std::string text(std::size_t key, Rng& rng) const {
    const std::size_t n =
        spec.min_fillers + static_cast<std::size_t>(rng.below(spec.max_fillers - spec.min_fillers + 1));
    std::vector<std::string> tokens;
    tokens.reserve(n + 1);
    for (std::size_t i = 0; i < n; ++i) tokens.push_back(filler(rng));
    tokens.push_back("key" + std::to_string(key));
    shuffle(std::span<std::string>(tokens), rng);
    std::string out;
    for (const auto& t : tokens) {
      if (!out.empty()) out += ' ';
      out += t;
    }
    return out;
  }
};

// Consecutive (positive, negative) pairs sharing the key of text_a.
std::vector<Example> make_examples(const Domain& dom, std::size_t size,
                                                           Rng& rng) {
  std::vector<Example> out;
  out.reserve(size);
  const std::size_t keys = dom.spec.key_count;
  for (std::size_t p = 0; p < size / 2; ++p) {
    const auto key = static_cast<std::size_t>(rng.below(keys));
    auto other = static_cast<std::size_t>(rng.below(keys - 1));
    if (other >= key) ++other;
    out.push_back({dom.text(key, rng), dom.text(key, rng), 1});
    out.push_back({dom.text(key, rng), dom.text(other, rng), 0});
  }
  return out;
}

}  // namespace

SyntheticShift gen_synthetic_shift(const ShiftSpec& spec, Rng& rng) {
  spec.validate();

  auto target = make_examples(Domain{spec, false}, spec.target_size, rng);
  auto source = make_examples(Domain{spec, true}, spec.source_size, rng);

  // Flip whole (positive, negative) pairs so both classes stay balanced.
  const std::size_t pairs = source.size() / 2;
  std::vector<std::size_t> pair_order(pairs);
  for (std::size_t i = 0; i < pairs; ++i) pair_order[i] = i;
  shuffle(std::span<std::size_t>(pair_order), rng);
  const auto n_flip =
      static_cast<std::size_t>(std::llround(spec.flip_fraction * static_cast<double>(pairs)));
  std::vector<bool> flipped(source.size(), false);
  for (std::size_t i = 0; i < n_flip; ++i) {
    flipped[2 * pair_order[i]] = true;
    flipped[2 * pair_order[i] + 1] = true;
  }

  std::vector<std::size_t> t_order(target.size());
  for (std::size_t i = 0; i < t_order.size(); ++i) t_order[i] = i;
  shuffle(std::span<std::size_t>(t_order), rng);
  std::vector<std::size_t> s_order(source.size());
  for (std::size_t i = 0; i < s_order.size(); ++i) s_order[i] = i;
  shuffle(std::span<std::size_t>(s_order), rng);

  SyntheticShift out;
  out.target = {"synthetic-target", 2, {}};
  for (std::size_t i : t_order) out.target.examples.push_back(std::move(target[i]));
  out.source = {"synthetic-source", 2, {}};
  for (std::size_t i : s_order) {
    Example ex = std::move(source[i]);
    if (flipped[i]) ex.label = 1 - ex.label;
    out.source_flipped.push_back(flipped[i]);
    out.source.examples.push_back(std::move(ex));
  }
  return out;
}

std::vector<Sample> featurize(const Dataset& ds, const EmbeddingTable& emb, std::size_t max_len) {
  std::vector<Sample> out;
  out.reserve(ds.examples.size());
  for (const auto& ex : ds.examples) {
    const auto a = tokenize(ex.text_a, max_len);
    const auto b = tokenize(ex.text_b, max_len);
    out.push_back({featurize_pair(a, b, emb), ex.label});
  }
  return out;
}

}  // namespace mwr
