#include "mwr/training.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "mwr/errors.hpp"

namespace mwr {
namespace {

// Independent streams derived from the run seed.
constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kRegulatorStream = 2;

std::vector<Sample> gather(std::span<const Sample> data, std::span<const std::size_t> idx) {
  std::vector<Sample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data[i]);
  return out;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

void require_non_empty(std::span<const Sample> data, const char* what) {
  if (data.empty()) throw DomainError(std::string(what) + ": empty training set");
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::backbone_only: return "backbone_only";
    case Method::fine_tuning: return "fine_tuning";
    case Method::data_merging: return "data_merging";
    case Method::mwr: return "mwr";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "backbone_only") return Method::backbone_only;
  if (name == "fine_tuning") return Method::fine_tuning;
  if (name == "data_merging") return Method::data_merging;
  if (name == "mwr") return Method::mwr;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

void TrainSpec::validate() const {
  arch.validate();
  if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train: learning rate must be positive");
  }
  if (batch_size == 0) throw ConfigError("train: batch size must be >= 1");
  if (method == Method::mwr) regulator_config().validate();
}

RegulatorConfig TrainSpec::regulator_config() const {
  RegulatorConfig cfg = regulator;
  cfg.source_batch_size = batch_size;
  return cfg;
}

ModelState initial_model(const TrainSpec& spec) { return init_model(spec.arch, spec.seed); }

double mean_loss(const ModelState& model, std::span<const Sample> data) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const Sample& s : data) total += per_example_loss(model, s);
  return total / static_cast<double>(data.size());
}

ModelState sgd_epoch(const ModelState& model, std::span<const Sample> data, double lr,
                     std::size_t batch_size, Rng& rng) {
  require_non_empty(data, "sgd_epoch");
  if (batch_size == 0) throw DomainError("sgd_epoch: batch size must be >= 1");

  auto order = iota_indices(data.size());
  shuffle(std::span<std::size_t>(order), rng);

  ModelState current = model;
  RealVector grad(model.params().size());
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    grad.fill(0.0);
    for (std::size_t k = start; k < end; ++k) {
      accumulate_gradient(current, data[order[k]], 1.0, grad);
    }
    current = current.with_params(scaled_add(-lr, grad, current.params()));
  }
  return current;
}

namespace {

TrainReport sgd_run(const TrainSpec& spec, std::span<const Sample> pre,
                    std::span<const Sample> main, std::span<const Sample> t_fs) {
  ModelState init = initial_model(spec);
  Rng rng = Rng(spec.seed).fork(kShuffleStream);
  ModelState model = init;
  for (std::size_t e = 0; !pre.empty() && e < spec.epochs; ++e) {
    model = sgd_epoch(model, pre, spec.learning_rate, spec.batch_size, rng);
  }
  std::vector<double> trace;
  for (std::size_t e = 0; e < spec.epochs; ++e) {
    model = sgd_epoch(model, main, spec.learning_rate, spec.batch_size, rng);
    trace.push_back(mean_loss(model, t_fs));
  }
  return {spec.method, spec.seed, std::move(init), std::move(model), std::move(trace), {}};
}

}  // namespace

TrainReport train_backbone_only(const TrainSpec& spec, std::span<const Sample> t_fs) {
  spec.validate();
  require_non_empty(t_fs, "train_backbone_only");
  return sgd_run(spec, {}, t_fs, t_fs);
}

TrainReport train_fine_tuning(const TrainSpec& spec, std::span<const Sample> s_train,
                              std::span<const Sample> t_fs) {
  spec.validate();
  require_non_empty(s_train, "train_fine_tuning");
  require_non_empty(t_fs, "train_fine_tuning");
  return sgd_run(spec, s_train, t_fs, t_fs);
}

TrainReport train_data_merging(const TrainSpec& spec, std::span<const Sample> s_train,
                               std::span<const Sample> t_fs) {
  spec.validate();
  require_non_empty(s_train, "train_data_merging");
  require_non_empty(t_fs, "train_data_merging");
  std::vector<Sample> merged(s_train.begin(), s_train.end());
  merged.insert(merged.end(), t_fs.begin(), t_fs.end());
  return sgd_run(spec, {}, merged, t_fs);
}

TrainReport train_mwr(const TrainSpec& spec, std::span<const Sample> s_train,
                      std::span<const Sample> t_fs) {
  spec.validate();
  require_non_empty(s_train, "train_mwr");
  require_non_empty(t_fs, "train_mwr");

  const RegulatorConfig cfg = spec.regulator_config();
  ModelState init = initial_model(spec);
  Rng shuffle_rng = Rng(spec.seed).fork(kShuffleStream);
  Rng meta_rng = Rng(spec.seed).fork(kRegulatorStream);

  ModelState model = init;
  std::vector<double> trace;
  std::vector<WeightTraceRow> weights;
  weights.reserve(spec.epochs * s_train.size());
  auto order = iota_indices(s_train.size());
  std::size_t step = 0;
  for (std::size_t e = 0; e < spec.epochs; ++e) {
    shuffle(std::span<std::size_t>(order), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.source_batch_size, ++step) {
      const std::size_t end = std::min(order.size(), start + cfg.source_batch_size);
      const std::span<const std::size_t> ids(order.data() + start, end - start);
      const auto batch = gather(s_train, ids);
      MwrStepResult r = mwr_step(model, batch, t_fs, cfg, meta_rng);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        weights.push_back({step, ids[i], r.meta_gradient[i], r.weights[i]});
      }
      model = std::move(r.model);
    }
    trace.push_back(mean_loss(model, t_fs));
  }
  return {spec.method, spec.seed, std::move(init), std::move(model), std::move(trace),
          std::move(weights)};
}

TrainReport train(const TrainSpec& spec, std::span<const Sample> s_train,
                  std::span<const Sample> t_fs) {
  switch (spec.method) {
    case Method::backbone_only: return train_backbone_only(spec, t_fs);
    case Method::fine_tuning: return train_fine_tuning(spec, s_train, t_fs);
    case Method::data_merging: return train_data_merging(spec, s_train, t_fs);
    case Method::mwr: return train_mwr(spec, s_train, t_fs);
  }
  throw ConfigError("train: unknown method");
}

nlohmann::json to_json(const TrainReport& report) {
  const Architecture& a = report.final_model.arch();
  nlohmann::json j;
  j["method"] = to_string(report.method);
  j["seed"] = report.seed;
  j["architecture"] = {{"kind", to_string(a.kind)},
                       {"embedding_dim", a.embedding_dim},
                       {"hidden", a.hidden},
                       {"class_count", a.class_count},
                       {"input_scale", a.input_scale}};
  j["target_loss_trace"] = report.target_loss_trace;
  j["params"] = report.final_model.params().values();
  if (!report.weight_trace.empty()) {
    double total = 0.0;
    std::size_t positive = 0;
    for (const auto& row : report.weight_trace) {
      total += row.regulated_weight;
      if (row.regulated_weight > 0.0) ++positive;
    }
    const auto n = static_cast<double>(report.weight_trace.size());
    j["weights"] = {{"rows", report.weight_trace.size()},
                    {"mean", total / n},
                    {"positive_fraction", static_cast<double>(positive) / n}};
  }
  return j;
}

std::string weight_trace_csv(std::span<const WeightTraceRow> rows) {
  std::string out = "step,example_id,raw_metagrad,regulated_weight\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{:.17g},{:.17g}\n", r.step, r.example_id, r.raw_metagrad,
                       r.regulated_weight);
  }
  return out;
}

}  // namespace mwr
