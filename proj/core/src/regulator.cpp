#include "mwr/regulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mwr/errors.hpp"

namespace mwr {

std::string to_string(WeightInit init) {
  switch (init) {
    case WeightInit::zero: return "zero";
    case WeightInit::one: return "one";
    case WeightInit::random: return "random";
  }
  return "unknown";
}

WeightInit parse_weight_init(std::string_view name) {
  if (name == "zero") return WeightInit::zero;
  if (name == "one") return WeightInit::one;
  if (name == "random") return WeightInit::random;
  throw ConfigError("unknown weight init policy '" + std::string(name) + "'");
}

void RegulatorConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("regulator: learning rate must be positive");
  }
  if (source_batch_size == 0) throw ConfigError("regulator: source batch size must be >= 1");
  if (target_batch_limit == 0) throw ConfigError("regulator: target batch limit must be >= 1");
}

BatchGradients::BatchGradients(const ModelState& model, std::span<const Sample> batch) {
  grads_.reserve(batch.size());
  losses_.reserve(batch.size());
  for (const Sample& s : batch) {
    RealVector g(model.params().size());
    losses_.push_back(accumulate_gradient(model, s, 1.0, g));
    require_finite(g.span(), "source gradient");
    grads_.push_back(std::move(g));
  }
}

RealVector BatchGradients::weighted_sum(const SourceWeights& w) const {
  require_same_length(w.size(), grads_.size(), "source weights vs batch");
  RealVector total(grads_.empty() ? 0 : grads_.front().size());
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    if (w[i] != 0.0) axpy(w[i], grads_[i], total);
  }
  return total;
}

SourceWeights init_weights(std::size_t n, WeightInit policy, Rng& rng) {
  if (n == 0) throw DomainError("init_weights: n must be at least 1");
  switch (policy) {
    case WeightInit::zero: return SourceWeights(RealVector(n, 0.0));
    case WeightInit::one: return SourceWeights(RealVector(n, 1.0));
    case WeightInit::random: return SourceWeights(sample_uniform(rng, 0.0, 1.0, n));
  }
  throw ConfigError("init_weights: unknown policy");
}

double weighted_source_loss(const ModelState& model, std::span<const Sample> batch,
                            const SourceWeights& w) {
  require_same_length(w.size(), batch.size(), "source weights vs batch");
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double cost = per_example_loss(model, batch[i]);
    total += w[i] * cost;
  }
  return total;
}

VirtualParams virtual_update(const ModelState& model, const BatchGradients& grads,
                             const SourceWeights& w, double lr) {
  const RealVector step = grads.weighted_sum(w);
  return VirtualParams(scaled_add(-lr, step, model.params()));
}

VirtualParams virtual_update(const ModelState& model, std::span<const Sample> batch,
                             const SourceWeights& w, double lr) {
  require_same_length(w.size(), batch.size(), "source weights vs batch");
  return virtual_update(model, BatchGradients(model, batch), w, lr);
}

double target_loss(const Architecture& arch, const VirtualParams& params,
                   std::span<const Sample> target) {
  if (target.empty()) throw DomainError("target_loss: empty target set");
  const ModelState m(arch, params.params());
  double total = 0.0;
  for (const Sample& s : target) total += per_example_loss(m, s);
  return total;
}

RealVector target_gradient(const Architecture& arch, const RealVector& params,
                           std::span<const Sample> target) {
  if (target.empty()) throw DomainError("target_gradient: empty target set");
  const ModelState m(arch, params);
  RealVector g(params.size());
  for (const Sample& s : target) accumulate_gradient(m, s, 1.0, g);
  require_finite(g.span(), "target_gradient");
  return g;
}

RealVector weight_meta_gradient(const ModelState& model, const BatchGradients& grads,
                                const SourceWeights& w, std::span<const Sample> target,
                                double lr) {
  const VirtualParams theta_v = virtual_update(model, grads, w, lr);
  const RealVector target_grad = target_gradient(model.arch(), theta_v.params(), target);
  RealVector meta(grads.size());
  for (std::size_t i = 0; i < grads.size(); ++i) meta[i] = -lr * dot(grads[i], target_grad);
  return meta;
}

RealVector weight_meta_gradient(const ModelState& model, std::span<const Sample> batch,
                                const SourceWeights& w, std::span<const Sample> target,
                                double lr) {
  require_same_length(w.size(), batch.size(), "source weights vs batch");
  return weight_meta_gradient(model, BatchGradients(model, batch), w, target, lr);
}

SourceWeights regulate_weights(const SourceWeights& w, const RealVector& meta_gradient,
                               double lr, bool clamp_nonnegative) {
  RealVector out = scaled_add(-lr, meta_gradient, w.values());
  if (clamp_nonnegative) {
    for (double& v : out) v = std::max(v, 0.0);
  }
  return SourceWeights(std::move(out));
}

ModelState weighted_training_step(const ModelState& model, const BatchGradients& grads,
                                  const SourceWeights& w, double lr) {
  return model.with_params(scaled_add(-lr, grads.weighted_sum(w), model.params()));
}

ModelState weighted_training_step(const ModelState& model, std::span<const Sample> batch,
                                  const SourceWeights& w, double lr) {
  require_same_length(w.size(), batch.size(), "source weights vs batch");
  return weighted_training_step(model, BatchGradients(model, batch), w, lr);
}

std::vector<Sample> select_target_batch(std::span<const Sample> target, std::size_t limit,
                                        Rng& rng) {
  if (target.size() <= limit) return {target.begin(), target.end()};

  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < target.size(); ++i) by_class[target[i].label].push_back(i);
  for (auto& [label, idx] : by_class) shuffle(std::span<std::size_t>(idx), rng);

  std::vector<Sample> out;
  out.reserve(limit);
  for (std::size_t round = 0; out.size() < limit; ++round) {
    for (const auto& [label, idx] : by_class) {
      if (round < idx.size() && out.size() < limit) out.push_back(target[idx[round]]);
    }
  }
  return out;
}

MwrStepResult mwr_step(const ModelState& model, std::span<const Sample> source_batch,
                       std::span<const Sample> target, const RegulatorConfig& cfg, Rng& rng) {
  cfg.validate();
  if (source_batch.empty()) throw DomainError("mwr_step: empty source batch");
  if (target.empty()) throw DomainError("mwr_step: empty target set");

  const double lr = cfg.learning_rate;
  const SourceWeights w0 = init_weights(source_batch.size(), cfg.init, rng);
  const BatchGradients grads(model, source_batch);

  RealVector meta;
  if (target.size() > cfg.target_batch_limit) {
    const auto tb = select_target_batch(target, cfg.target_batch_limit, rng);
    meta = weight_meta_gradient(model, grads, w0, tb, lr);
  } else {
    meta = weight_meta_gradient(model, grads, w0, target, lr);
  }

  SourceWeights regulated = regulate_weights(w0, meta, lr, cfg.clamp_nonnegative);
  ModelState next = weighted_training_step(model, grads, regulated, lr);
  return {std::move(next), std::move(regulated), std::move(meta)};
}

}  // namespace mwr
