#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mwr/backbone.hpp"
#include "mwr/regulator.hpp"
#include "mwr/rng.hpp"

namespace mwr {

enum class Method { backbone_only, fine_tuning, data_merging, mwr };

std::string to_string(Method m);
Method parse_method(std::string_view name);

struct TrainSpec {
  Method method = Method::mwr;
  Architecture arch;
  std::size_t epochs = 20;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  std::size_t batch_size = 64;  // plain SGD batches (baselines)
  RegulatorConfig regulator;    // mwr only

  void validate() const;
  /// The regulator settings actually used: `regulator` with `batch_size` as
  /// the source batch size.
  RegulatorConfig regulator_config() const;
};

struct WeightTraceRow {
  std::size_t step = 0;
  std::size_t example_id = 0;  // index into the source set
  double raw_metagrad = 0.0;
  double regulated_weight = 0.0;
};

struct TrainReport {
  Method method = Method::mwr;
  std::uint64_t seed = 0;
  ModelState initial;
  ModelState final_model;
  std::vector<double> target_loss_trace;  // mean target CE after each epoch
  std::vector<WeightTraceRow> weight_trace;
};

/// Initial model shared by every method for a given seed.
ModelState initial_model(const TrainSpec& spec);

/// One shuffled pass of mini-batch descent on the summed (unit-weight) loss.
ModelState sgd_epoch(const ModelState& model, std::span<const Sample> data, double lr,
                     std::size_t batch_size, Rng& rng);

TrainReport train_backbone_only(const TrainSpec& spec, std::span<const Sample> t_fs);
TrainReport train_fine_tuning(const TrainSpec& spec, std::span<const Sample> s_train,
                              std::span<const Sample> t_fs);
TrainReport train_data_merging(const TrainSpec& spec, std::span<const Sample> s_train,
                               std::span<const Sample> t_fs);
TrainReport train_mwr(const TrainSpec& spec, std::span<const Sample> s_train,
                      std::span<const Sample> t_fs);

/// Dispatch on spec.method. backbone_only ignores `s_train`.
TrainReport train(const TrainSpec& spec, std::span<const Sample> s_train,
                  std::span<const Sample> t_fs);

double mean_loss(const ModelState& model, std::span<const Sample> data);

nlohmann::json to_json(const TrainReport& report);

/// Weight trace as CSV: step,example_id,raw_metagrad,regulated_weight.
std::string weight_trace_csv(std::span<const WeightTraceRow> rows);

}  // namespace mwr
