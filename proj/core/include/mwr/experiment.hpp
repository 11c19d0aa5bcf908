#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mwr/backbone.hpp"
#include "mwr/data.hpp"
#include "mwr/eval.hpp"
#include "mwr/regulator.hpp"
#include "mwr/training.hpp"

namespace mwr {

struct DataSourceConfig {
  std::filesystem::path path;
  std::filesystem::path test_path;  // target only; empty means "use the remainder"
  std::vector<std::size_t> keep_labels;
  bool balance = false;
};

struct BackboneConfig {
  Architecture arch{BackboneKind::mlp, 16, 32, 2, 16.0};
  std::size_t buckets = 4096;
  std::uint64_t embedding_seed = 0;
  std::size_t max_len = 40;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::optional<ShiftSpec> synthetic;  // when set, source/target paths are unused
  DataSourceConfig source;
  DataSourceConfig target;
  BackboneConfig backbone;
  std::vector<Method> methods;
  std::vector<std::size_t> shots;
  std::vector<std::uint64_t> seeds;
  double learning_rate = 0.05;
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  RegulatorConfig regulator;  // its learning_rate is ignored; see below
  std::optional<double> regulator_learning_rate;  // nullopt: same as learning_rate
  std::size_t permutations = kDefaultPermutations;
  std::optional<Method> reference;  // nullopt: best non-mwr method per cell
  std::filesystem::path output_dir = "results";

  void validate() const;
  TrainSpec train_spec(Method method, std::uint64_t seed) const;
};

/// Reads a JSON document. Unknown keys anywhere are ConfigErrors. Relative
/// paths are resolved against `base_dir`.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------

struct ResultRow {
  std::string method;
  std::size_t shot = 0;
  std::uint64_t seed = 0;
  std::optional<double> accuracy;  // nullopt on error rows
  std::optional<double> p_value;   // nullopt for the reference itself
  std::string reference;
  std::string error;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct AggregateRow {
  std::string method;
  std::size_t shot = 0;
  double mean_accuracy = 0.0;
  std::size_t runs = 0;
  std::size_t significant = 0;  // runs with p < 0.05 against the reference
};

struct ResultsTable {
  nlohmann::json config;
  std::vector<ResultRow> rows;

  /// Means over non-error rows, in first-appearance order of (method, shot).
  std::vector<AggregateRow> aggregates() const;
};

/// Featurized inputs of one (shot, seed) cell.
struct CellData {
  std::vector<Sample> source;
  std::vector<Sample> few_shot;
  std::vector<Sample> test;
  std::vector<bool> source_flipped;  // synthetic runs only
};

struct CellResult {
  std::vector<ResultRow> rows;
  std::vector<TrainReport> reports;
};

CellData prepare_cell(const ExperimentConfig& cfg, std::size_t shot, std::uint64_t seed);
CellResult run_cell(const ExperimentConfig& cfg, const CellData& data, std::size_t shot,
                    std::uint64_t seed);

/// Error rows from a NumericalError carry this prefix.
inline constexpr std::string_view kNumericalErrorPrefix = "numerical: ";

/// Full (shot, seed) grid. A failing cell yields error rows; the run goes on.
ResultsTable run_experiment(const ExperimentConfig& cfg);

/// Writes results.csv, results.json and summary.txt into `dir`.
void emit_results(const ResultsTable& table, const std::filesystem::path& dir);

std::string results_csv(const ResultsTable& table);
std::vector<ResultRow> parse_results_csv(const std::string& text);
std::string summary_grid(const ResultsTable& table);
nlohmann::json to_json(const ResultsTable& table);
ResultsTable results_from_json(const nlohmann::json& doc);
ResultsTable load_results_json(const std::filesystem::path& path);

}  // namespace mwr
