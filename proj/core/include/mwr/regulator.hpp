#pragma once

// Meta-weight regulation of source examples.
//
// One meta-iteration over a source batch B with weights w:
//
//   theta~   = theta - lr * sum_i w_i g_i(theta)              (virtual step)
//   L_t      = sum_j CE(f(x_j; theta~), y_j)                  (target loss)
//   m_i      = dL_t/dw_i = -lr * <g_i(theta), grad L_t(theta~)>
//   w~_i     = max(0, w_i - lr * m_i)                          (regulation)
//   theta'   = theta - lr * sum_i w~_i g_i(theta)              (real step)
//
// g_i is evaluated at the original theta and does not depend on w, so m_i is
// the exact derivative of L_t(theta~(w)). With w = 0 the virtual step is the
// identity and w~_i = lr^2 <g_i, grad L_t(theta)>.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mwr/backbone.hpp"
#include "mwr/linalg.hpp"
#include "mwr/rng.hpp"

namespace mwr {

enum class WeightInit { zero, one, random };

std::string to_string(WeightInit init);
WeightInit parse_weight_init(std::string_view name);

struct RegulatorConfig {
  double learning_rate = 0.05;
  WeightInit init = WeightInit::zero;
  bool clamp_nonnegative = true;
  std::size_t source_batch_size = 64;
  // Target sets larger than this are replaced, per step, by a seeded
  // class-balanced mini-batch of this size.
  std::size_t target_batch_limit = 256;

  void validate() const;
};

/// Per-example weights for the current source batch.
class SourceWeights {
 public:
  SourceWeights() = default;
  explicit SourceWeights(RealVector values) : values_(std::move(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  const RealVector& values() const noexcept { return values_; }

 private:
  RealVector values_;
};

/// Parameters after the virtual step. Never written back into a model.
class VirtualParams {
 public:
  explicit VirtualParams(RealVector params) : params_(std::move(params)) {}
  const RealVector& params() const noexcept { return params_; }

 private:
  RealVector params_;
};

/// Per-example source gradients at a fixed theta. Computed once per batch
/// and reused by every stage of the meta-iteration.
class BatchGradients {
 public:
  BatchGradients(const ModelState& model, std::span<const Sample> batch);

  std::size_t size() const noexcept { return grads_.size(); }
  const RealVector& operator[](std::size_t i) const noexcept { return grads_[i]; }
  std::span<const double> losses() const noexcept { return losses_; }

  /// sum_i w_i g_i accumulated in index order.
  RealVector weighted_sum(const SourceWeights& w) const;

 private:
  std::vector<RealVector> grads_;
  std::vector<double> losses_;
};

SourceWeights init_weights(std::size_t n, WeightInit policy, Rng& rng);

/// sum_i w_i * CE_i at the model's parameters.
double weighted_source_loss(const ModelState& model, std::span<const Sample> batch,
                            const SourceWeights& w);

VirtualParams virtual_update(const ModelState& model, std::span<const Sample> batch,
                             const SourceWeights& w, double lr);
VirtualParams virtual_update(const ModelState& model, const BatchGradients& grads,
                             const SourceWeights& w, double lr);

/// sum_j CE_j evaluated at `params`. Throws DomainError on an empty target set.
double target_loss(const Architecture& arch, const VirtualParams& params,
                   std::span<const Sample> target);

/// Gradient of target_loss with respect to the parameters.
RealVector target_gradient(const Architecture& arch, const RealVector& params,
                           std::span<const Sample> target);

/// dL_t(theta~(w))/dw, one entry per source example.
RealVector weight_meta_gradient(const ModelState& model, std::span<const Sample> batch,
                                const SourceWeights& w, std::span<const Sample> target,
                                double lr);
RealVector weight_meta_gradient(const ModelState& model, const BatchGradients& grads,
                                const SourceWeights& w, std::span<const Sample> target,
                                double lr);

SourceWeights regulate_weights(const SourceWeights& w, const RealVector& meta_gradient,
                               double lr, bool clamp_nonnegative);

/// theta - lr * sum_i w_i g_i(theta), starting from the model's own theta.
ModelState weighted_training_step(const ModelState& model, std::span<const Sample> batch,
                                  const SourceWeights& w, double lr);
ModelState weighted_training_step(const ModelState& model, const BatchGradients& grads,
                                  const SourceWeights& w, double lr);

struct MwrStepResult {
  ModelState model;
  SourceWeights weights;     // regulated
  RealVector meta_gradient;  // raw dL_t/dw
};

/// Whole meta-iteration: fresh weights, virtual step, meta-gradient,
/// regulation, weighted step from the original theta.
MwrStepResult mwr_step(const ModelState& model, std::span<const Sample> source_batch,
                       std::span<const Sample> target, const RegulatorConfig& cfg, Rng& rng);

/// Class-balanced subset of at most `limit` samples (round-robin over
/// classes, shuffled within class). Returns the whole set when it fits.
std::vector<Sample> select_target_batch(std::span<const Sample> target, std::size_t limit,
                                        Rng& rng);

}  // namespace mwr
