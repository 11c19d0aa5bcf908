#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mwr/linalg.hpp"

namespace mwr {

/// A text pair with its class label.
struct Example {
  std::string text_a;
  std::string text_b;
  std::size_t label = 0;

  friend bool operator==(const Example&, const Example&) = default;
};

/// An example after tokenization and pooling: the backbone's input.
struct Sample {
  RealVector features;
  std::size_t label = 0;
};

using FeatureVector = RealVector;

// ---------------------------------------------------------------------------
// Frozen hashed embeddings

struct EmbeddingTable {
  std::size_t buckets = 0;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  RealVector values;  // buckets x dim, row-major

  std::span<const double> row(std::size_t bucket) const {
    return values.span().subspan(bucket * dim, dim);
  }
};

/// Entries uniform in [-0.5/dim, 0.5/dim]. Throws DomainError on zero sizes.
EmbeddingTable build_embedding(std::uint64_t seed, std::size_t buckets, std::size_t dim);

/// FNV-1a 64-bit, reduced modulo `buckets`.
std::size_t token_bucket(std::string_view token, std::size_t buckets);

/// concat(u, v, |u - v|, u * v) where u, v are mean-pooled embeddings.
/// An empty sequence pools to the zero vector.
FeatureVector featurize_pair(std::span<const std::string> a, std::span<const std::string> b,
                             const EmbeddingTable& emb);

// ---------------------------------------------------------------------------
// Architectures

enum class BackboneKind { logistic, mlp, bilinear };

std::string to_string(BackboneKind kind);
BackboneKind parse_backbone_kind(std::string_view name);

struct Architecture {
  BackboneKind kind = BackboneKind::mlp;
  std::size_t embedding_dim = 16;
  std::size_t hidden = 32;  // mlp only
  std::size_t class_count = 2;
  // Fixed multiplier on the pooled embeddings before the first layer. Not
  // trained. Bilinear scores see it squared since both u and v are scaled.
  double input_scale = 1.0;

  std::size_t feature_dim() const noexcept { return 4 * embedding_dim; }
  std::size_t param_count() const noexcept;
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

class ModelState {
 public:
  ModelState(Architecture arch, RealVector params);

  const Architecture& arch() const noexcept { return arch_; }
  const RealVector& params() const noexcept { return params_; }
  RealVector& mutable_params() noexcept { return params_; }
  std::size_t class_count() const noexcept { return arch_.class_count; }

  /// Same architecture, different parameter vector.
  ModelState with_params(RealVector params) const { return {arch_, std::move(params)}; }

 private:
  Architecture arch_;
  RealVector params_;
};

/// Parameters uniform in [-0.1, 0.1] from `seed`.
ModelState init_model(const Architecture& arch, std::uint64_t seed);
ModelState zero_model(const Architecture& arch);

// ---------------------------------------------------------------------------
// Forward pass and gradients

inline constexpr double kProbabilityFloor = 1e-12;

/// Softmax class distribution.
RealVector forward(const ModelState& model, const FeatureVector& features);

std::size_t predict_class(const ModelState& model, const FeatureVector& features);

/// -log(max(p[label], 1e-12)).
double per_example_loss(const ModelState& model, const Sample& sample);

/// d per_example_loss / d params, same layout as params.
RealVector per_example_gradient(const ModelState& model, const Sample& sample);

/// out += weight * gradient. Returns the unweighted loss. `out` must have
/// the parameter length.
double accumulate_gradient(const ModelState& model, const Sample& sample, double weight,
                           RealVector& out);

void validate_sample(const ModelState& model, const Sample& sample);

}  // namespace mwr
