#include "mwr/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "mwr/errors.hpp"

namespace mwr {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kDataStream = 11;
constexpr std::uint64_t kPermutationStream = 12;

// Reads keys out of one JSON object and rejects whatever is left over.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!j_.contains(key)) return fallback;
    used_.insert(key);
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  template <typename T>
  T require(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(where(key) + " is required");
    return get<T>(key, T{});
  }

  Section sub(const std::string& key) {
    used_.insert(key);
    return Section(j_.at(key), where(key));
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.contains(item.key())) throw ConfigError("unknown key " + where(item.key()));
    }
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

DataSourceConfig parse_source(Section s, const fs::path& base, bool allow_test) {
  DataSourceConfig d;
  d.path = resolve(base, s.require<std::string>("path"));
  if (allow_test) d.test_path = resolve(base, s.get<std::string>("test_path", ""));
  d.keep_labels = s.get<std::vector<std::size_t>>("keep_labels", {});
  d.balance = s.get<bool>("balance", false);
  s.finish();
  return d;
}

ShiftSpec parse_shift(Section s) {
  ShiftSpec spec;
  spec.source_size = s.get("source_size", spec.source_size);
  spec.target_size = s.get("target_size", spec.target_size);
  spec.key_count = s.get("key_count", spec.key_count);
  spec.target_vocab = s.get("target_vocab", spec.target_vocab);
  spec.source_vocab = s.get("source_vocab", spec.source_vocab);
  spec.vocab_overlap = s.get("vocab_overlap", spec.vocab_overlap);
  spec.min_fillers = s.get("min_fillers", spec.min_fillers);
  spec.max_fillers = s.get("max_fillers", spec.max_fillers);
  spec.flip_fraction = s.get("flip_fraction", spec.flip_fraction);
  s.finish();
  return spec;
}

json shift_json(const ShiftSpec& s) {
  return {{"source_size", s.source_size},     {"target_size", s.target_size},
          {"key_count", s.key_count},         {"target_vocab", s.target_vocab},
          {"source_vocab", s.source_vocab},   {"vocab_overlap", s.vocab_overlap},
          {"min_fillers", s.min_fillers},     {"max_fillers", s.max_fillers},
          {"flip_fraction", s.flip_fraction}};
}

json source_json(const DataSourceConfig& d, bool with_test) {
  json j = {{"path", d.path.generic_string()},
            {"keep_labels", d.keep_labels},
            {"balance", d.balance}};
  if (with_test && !d.test_path.empty()) j["test_path"] = d.test_path.generic_string();
  return j;
}

Dataset preprocess(Dataset ds, const DataSourceConfig& src, std::uint64_t seed) {
  if (!src.keep_labels.empty()) ds = filter_labels(ds, src.keep_labels).dataset;
  if (src.balance) ds = balance_downsample(ds, seed);
  return ds;
}

std::string format_optional(const std::optional<double>& v) {
  return v ? fmt::format("{:.17g}", *v) : std::string();
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

template <typename T>
T parse_number(const std::string& s, std::size_t line) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("results.csv: bad number '" + s + "'", line);
  }
  return value;
}

std::optional<double> parse_optional(const std::string& s, std::size_t line) {
  if (s.empty()) return std::nullopt;
  return parse_number<double>(s, line);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ConfigError("experiment: at least one method is required");
  if (shots.empty()) throw ConfigError("experiment: at least one shot value is required");
  if (seeds.empty()) throw ConfigError("experiment: at least one seed is required");
  if (std::find(shots.begin(), shots.end(), 0) != shots.end()) {
    throw ConfigError("experiment: shot values must be >= 1");
  }
  if (synthetic) {
    synthetic->validate();
    if (backbone.arch.class_count != 2) {
      throw ConfigError("experiment: synthetic data is binary; class_count must be 2");
    }
  } else if (source.path.empty() || target.path.empty()) {
    throw ConfigError("experiment: source and target paths are required without 'synthetic'");
  }
  if (backbone.buckets == 0) throw ConfigError("backbone: buckets must be >= 1");
  if (backbone.max_len == 0) throw ConfigError("backbone: max_len must be >= 1");
  if (permutations == 0) throw ConfigError("evaluation: permutations must be >= 1");
  for (Method m : methods) train_spec(m, 0).validate();
}

TrainSpec ExperimentConfig::train_spec(Method method, std::uint64_t seed) const {
  TrainSpec spec;
  spec.method = method;
  spec.arch = backbone.arch;
  spec.epochs = epochs;
  spec.learning_rate = learning_rate;
  spec.seed = seed;
  spec.batch_size = batch_size;
  spec.regulator = regulator;
  spec.regulator.learning_rate = regulator_learning_rate.value_or(learning_rate);
  return spec;
}

ExperimentConfig parse_experiment_config(const json& doc, const fs::path& base_dir) {
  Section root(doc, "");
  ExperimentConfig cfg;
  cfg.name = root.get<std::string>("name", cfg.name);

  if (root.has("synthetic")) cfg.synthetic = parse_shift(root.sub("synthetic"));
  if (root.has("source")) cfg.source = parse_source(root.sub("source"), base_dir, false);
  if (root.has("target")) cfg.target = parse_source(root.sub("target"), base_dir, true);

  if (root.has("backbone")) {
    Section b = root.sub("backbone");
    auto& a = cfg.backbone.arch;
    a.kind = parse_backbone_kind(b.get<std::string>("kind", to_string(a.kind)));
    a.embedding_dim = b.get("embedding_dim", a.embedding_dim);
    a.hidden = b.get("hidden", a.hidden);
    a.class_count = b.get("class_count", a.class_count);
    a.input_scale = b.get("input_scale", a.input_scale);
    cfg.backbone.buckets = b.get("buckets", cfg.backbone.buckets);
    cfg.backbone.embedding_seed = b.get("embedding_seed", cfg.backbone.embedding_seed);
    cfg.backbone.max_len = b.get("max_len", cfg.backbone.max_len);
    b.finish();
  }

  for (const auto& m : root.require<std::vector<std::string>>("methods")) {
    cfg.methods.push_back(parse_method(m));
  }
  cfg.shots = root.require<std::vector<std::size_t>>("shots");
  cfg.seeds = root.require<std::vector<std::uint64_t>>("seeds");

  if (root.has("training")) {
    Section t = root.sub("training");
    cfg.learning_rate = t.get("learning_rate", cfg.learning_rate);
    cfg.epochs = t.get("epochs", cfg.epochs);
    cfg.batch_size = t.get("batch_size", cfg.batch_size);
    t.finish();
  }
  if (root.has("regulator")) {
    Section r = root.sub("regulator");
    cfg.regulator.init = parse_weight_init(r.get<std::string>("init", to_string(cfg.regulator.init)));
    cfg.regulator.clamp_nonnegative = r.get("clamp_nonnegative", cfg.regulator.clamp_nonnegative);
    cfg.regulator.target_batch_limit = r.get("target_batch_limit", cfg.regulator.target_batch_limit);
    if (r.has("learning_rate")) cfg.regulator_learning_rate = r.get<double>("learning_rate", 0.0);
    r.finish();
  }
  if (root.has("evaluation")) {
    Section e = root.sub("evaluation");
    cfg.permutations = e.get("permutations", cfg.permutations);
    const auto ref = e.get<std::string>("reference", "auto");
    if (ref != "auto") cfg.reference = parse_method(ref);
    e.finish();
  }
  cfg.output_dir = resolve(base_dir, root.get<std::string>("output_dir", cfg.output_dir.string()));
  root.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return parse_experiment_config(doc, path.parent_path());
}

json to_json(const ExperimentConfig& cfg) {
  const auto& a = cfg.backbone.arch;
  json methods = json::array();
  for (Method m : cfg.methods) methods.push_back(to_string(m));
  json j = {
      {"name", cfg.name},
      {"backbone",
       {{"kind", to_string(a.kind)},
        {"embedding_dim", a.embedding_dim},
        {"hidden", a.hidden},
        {"class_count", a.class_count},
        {"input_scale", a.input_scale},
        {"buckets", cfg.backbone.buckets},
        {"embedding_seed", cfg.backbone.embedding_seed},
        {"max_len", cfg.backbone.max_len}}},
      {"methods", methods},
      {"shots", cfg.shots},
      {"seeds", cfg.seeds},
      {"training",
       {{"learning_rate", cfg.learning_rate},
        {"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size}}},
      {"regulator",
       {{"init", to_string(cfg.regulator.init)},
        {"clamp_nonnegative", cfg.regulator.clamp_nonnegative},
        {"target_batch_limit", cfg.regulator.target_batch_limit},
        {"learning_rate", cfg.regulator_learning_rate.value_or(cfg.learning_rate)}}},
      {"evaluation",
       {{"permutations", cfg.permutations},
        {"reference", cfg.reference ? to_string(*cfg.reference) : "auto"}}},
      {"output_dir", cfg.output_dir.generic_string()},
  };
  if (cfg.synthetic) {
    j["synthetic"] = shift_json(*cfg.synthetic);
  } else {
    j["source"] = source_json(cfg.source, false);
    j["target"] = source_json(cfg.target, true);
  }
  return j;
}

// ---------------------------------------------------------------------------

CellData prepare_cell(const ExperimentConfig& cfg, std::size_t shot, std::uint64_t seed) {
  Dataset source;
  Dataset target_pool;
  std::optional<Dataset> test;
  CellData cell;

  if (cfg.synthetic) {
    Rng rng = Rng(seed).fork(kDataStream);
    SyntheticShift shift = gen_synthetic_shift(*cfg.synthetic, rng);
    source = std::move(shift.source);
    target_pool = std::move(shift.target);
    cell.source_flipped = std::move(shift.source_flipped);
  } else {
    source = preprocess(load_tsv(cfg.source.path), cfg.source, seed);
    target_pool = preprocess(load_tsv(cfg.target.path), cfg.target, seed);
    if (!cfg.target.test_path.empty()) {
      test = preprocess(load_tsv(cfg.target.test_path), cfg.target, seed);
    }
  }

  const std::size_t classes = cfg.backbone.arch.class_count;
  for (const Dataset* ds : {&source, &target_pool}) {
    if (ds->class_count != classes) {
      throw DataError("dataset '" + ds->name + "' has " + std::to_string(ds->class_count) +
                      " classes, backbone expects " + std::to_string(classes));
    }
  }

  FewShotSplit split = sample_few_shot(target_pool, {shot, seed});
  if (!test) test = std::move(split.remainder);
  if (test->examples.empty()) throw DataError("target test set is empty");

  const EmbeddingTable emb = build_embedding(cfg.backbone.embedding_seed, cfg.backbone.buckets,
                                             cfg.backbone.arch.embedding_dim);
  cell.source = featurize(source, emb, cfg.backbone.max_len);
  cell.few_shot = featurize(split.few_shot, emb, cfg.backbone.max_len);
  cell.test = featurize(*test, emb, cfg.backbone.max_len);
  return cell;
}

CellResult run_cell(const ExperimentConfig& cfg, const CellData& data, std::size_t shot,
                    std::uint64_t seed) {
  CellResult result;
  std::vector<PredictionRecord> preds;
  for (Method m : cfg.methods) {
    TrainReport report = train(cfg.train_spec(m, seed), data.source, data.few_shot);
    if (!result.reports.empty() &&
        report.initial.params() != result.reports.front().initial.params()) {
      throw std::logic_error("methods in one cell started from different initializations");
    }
    preds.push_back(predict(report.final_model, data.test));
    result.reports.push_back(std::move(report));
  }

  std::vector<double> acc;
  for (const auto& p : preds) acc.push_back(accuracy(p));

  std::optional<std::size_t> ref;
  if (cfg.reference) {
    const auto it = std::find(cfg.methods.begin(), cfg.methods.end(), *cfg.reference);
    if (it != cfg.methods.end()) ref = static_cast<std::size_t>(it - cfg.methods.begin());
  } else {
    for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
      if (cfg.methods[i] == Method::mwr) continue;
      if (!ref || acc[i] > acc[*ref]) ref = i;
    }
  }

  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    ResultRow row;
    row.method = to_string(cfg.methods[i]);
    row.shot = shot;
    row.seed = seed;
    row.accuracy = acc[i];
    if (ref) {
      row.reference = to_string(cfg.methods[*ref]);
      if (i != *ref) {
        Rng rng = Rng(seed ^ (shot * 0x9e3779b97f4a7c15ULL)).fork(kPermutationStream);
        row.p_value = permutation_test(preds[i], preds[*ref], cfg.permutations, rng);
      }
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

ResultsTable run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ResultsTable table;
  table.config = to_json(cfg);

  std::vector<ResultRow> rows;
  for (std::size_t shot : cfg.shots) {
    for (std::uint64_t seed : cfg.seeds) {
      try {
        const CellData data = prepare_cell(cfg, shot, seed);
        auto cell = run_cell(cfg, data, shot, seed);
        rows.insert(rows.end(), cell.rows.begin(), cell.rows.end());
      } catch (const std::exception& e) {
        std::string what = e.what();
        if (dynamic_cast<const NumericalError*>(&e) != nullptr) what = std::string(kNumericalErrorPrefix) + what;
        for (Method m : cfg.methods) {
          rows.push_back({to_string(m), shot, seed, std::nullopt, std::nullopt, "", what});
        }
      }
    }
  }

  // Method-major order; the loop above already produced (shot, seed) order.
  std::map<std::string, std::size_t> rank;
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) rank.emplace(to_string(cfg.methods[i]), i);
  std::stable_sort(rows.begin(), rows.end(), [&](const ResultRow& a, const ResultRow& b) {
    return rank.at(a.method) < rank.at(b.method);
  });
  table.rows = std::move(rows);
  return table;
}

std::vector<AggregateRow> ResultsTable::aggregates() const {
  std::vector<AggregateRow> out;
  std::vector<double> sums;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const AggregateRow& a) {
      return a.method == r.method && a.shot == r.shot;
    });
    if (it == out.end()) {
      out.push_back({r.method, r.shot, 0.0, 0, 0});
      sums.push_back(0.0);
      it = out.end() - 1;
    }
    if (!r.accuracy) continue;
    const auto k = static_cast<std::size_t>(it - out.begin());
    sums[k] += *r.accuracy;
    ++it->runs;
    if (r.p_value && *r.p_value < 0.05) ++it->significant;
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].mean_accuracy = out[k].runs ? sums[k] / static_cast<double>(out[k].runs) : 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string results_csv(const ResultsTable& table) {
  std::string out = "method,shot,seed,accuracy,p_value,reference,error\n";
  for (const auto& r : table.rows) {
    out += fmt::format("{},{},{},{},{},{},{}\n", r.method, r.shot, r.seed,
                       format_optional(r.accuracy), format_optional(r.p_value), r.reference,
                       csv_quote(r.error));
  }
  return out;
}

std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<ResultRow> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw ParseError("results.csv: expected 7 fields", line_no);
    rows.push_back({f[0], parse_number<std::size_t>(f[1], line_no),
                    parse_number<std::uint64_t>(f[2], line_no), parse_optional(f[3], line_no),
                    parse_optional(f[4], line_no), f[5], f[6]});
  }
  return rows;
}

std::string summary_grid(const ResultsTable& table) {
  const auto aggs = table.aggregates();
  std::vector<std::string> methods;
  std::vector<std::size_t> shots;
  for (const auto& a : aggs) {
    if (std::find(methods.begin(), methods.end(), a.method) == methods.end()) {
      methods.push_back(a.method);
    }
    if (std::find(shots.begin(), shots.end(), a.shot) == shots.end()) shots.push_back(a.shot);
  }
  std::sort(shots.begin(), shots.end());
  const auto find = [&](const std::string& m, std::size_t s) -> const AggregateRow* {
    for (const auto& a : aggs) {
      if (a.method == m && a.shot == s) return &a;
    }
    return nullptr;
  };

  std::string out;
  const std::string name = table.config.is_object() ? table.config.value("name", "") : "";
  out += fmt::format("Mean target-test accuracy{}\n\n", name.empty() ? "" : " - " + name);
  out += fmt::format("{:<16}", "method");
  for (std::size_t s : shots) out += fmt::format("{:>14}", fmt::format("{}-shot", s));
  out += '\n';
  for (const auto& m : methods) {
    out += fmt::format("{:<16}", m);
    for (std::size_t s : shots) {
      const AggregateRow* a = find(m, s);
      out += a && a->runs ? fmt::format("{:>14.4f}", a->mean_accuracy) : fmt::format("{:>14}", "-");
    }
    out += '\n';
  }
  out += "\nRuns with p < 0.05 against the reference method\n\n";
  for (const auto& m : methods) {
    out += fmt::format("{:<16}", m);
    for (std::size_t s : shots) {
      const AggregateRow* a = find(m, s);
      out += a ? fmt::format("{:>14}", fmt::format("{}/{}", a->significant, a->runs))
               : fmt::format("{:>14}", "-");
    }
    out += '\n';
  }
  return out;
}

json to_json(const ResultsTable& table) {
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json rows = json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"method", r.method},
                    {"shot", r.shot},
                    {"seed", r.seed},
                    {"accuracy", opt(r.accuracy)},
                    {"p_value", opt(r.p_value)},
                    {"reference", r.reference},
                    {"error", r.error}});
  }
  json aggs = json::array();
  for (const auto& a : table.aggregates()) {
    aggs.push_back({{"method", a.method},
                    {"shot", a.shot},
                    {"mean_accuracy", a.mean_accuracy},
                    {"runs", a.runs},
                    {"significant", a.significant}});
  }
  return {{"config", table.config}, {"rows", rows}, {"aggregates", aggs}};
}

ResultsTable results_from_json(const json& doc) {
  ResultsTable table;
  try {
    table.config = doc.at("config");
    for (const auto& r : doc.at("rows")) {
      ResultRow row;
      row.method = r.at("method").get<std::string>();
      row.shot = r.at("shot").get<std::size_t>();
      row.seed = r.at("seed").get<std::uint64_t>();
      if (!r.at("accuracy").is_null()) row.accuracy = r.at("accuracy").get<double>();
      if (!r.at("p_value").is_null()) row.p_value = r.at("p_value").get<double>();
      row.reference = r.at("reference").get<std::string>();
      row.error = r.at("error").get<std::string>();
      table.rows.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("results.json: ") + e.what());
  }
  return table;
}

ResultsTable load_results_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return results_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw DataError("'" + path.string() + "': " + e.what());
  }
}

void emit_results(const ResultsTable& table, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  write_text(dir / "results.csv", results_csv(table));
  write_text(dir / "results.json", to_json(table).dump(2) + "\n");
  write_text(dir / "summary.txt", summary_grid(table));
}

}  // namespace mwr
