#include "mwr/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "mwr/errors.hpp"
#include "mwr/rng.hpp"

namespace mwr {

EmbeddingTable build_embedding(std::uint64_t seed, std::size_t buckets, std::size_t dim) {
  if (buckets == 0 || dim == 0) throw DomainError("build_embedding: zero dimension");
  const double bound = 0.5 / static_cast<double>(dim);
  Rng rng(seed);
  EmbeddingTable table{buckets, dim, seed, RealVector(buckets * dim)};
  for (double& v : table.values) v = rng.uniform(-bound, bound);
  return table;
}

std::size_t token_bucket(std::string_view token, std::size_t buckets) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(h % buckets);
}

namespace {

void mean_pool(std::span<const std::string> tokens, const EmbeddingTable& emb,
               std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (tokens.empty()) return;
  for (const auto& tok : tokens) {
    const auto row = emb.row(token_bucket(tok, emb.buckets));
    for (std::size_t k = 0; k < emb.dim; ++k) out[k] += row[k];
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (double& v : out) v *= inv;
}

}  // namespace

FeatureVector featurize_pair(std::span<const std::string> a, std::span<const std::string> b,
                             const EmbeddingTable& emb) {
  const std::size_t d = emb.dim;
  FeatureVector out(4 * d);
  auto s = out.span();
  auto u = s.subspan(0, d);
  auto v = s.subspan(d, d);
  mean_pool(a, emb, u);
  mean_pool(b, emb, v);
  for (std::size_t k = 0; k < d; ++k) {
    s[2 * d + k] = std::abs(u[k] - v[k]);
    s[3 * d + k] = u[k] * v[k];
  }
  return out;
}

std::string to_string(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::logistic: return "logistic";
    case BackboneKind::mlp: return "mlp";
    case BackboneKind::bilinear: return "bilinear";
  }
  return "unknown";
}

BackboneKind parse_backbone_kind(std::string_view name) {
  if (name == "logistic") return BackboneKind::logistic;
  if (name == "mlp") return BackboneKind::mlp;
  if (name == "bilinear") return BackboneKind::bilinear;
  throw ConfigError("unknown backbone kind '" + std::string(name) + "'");
}

std::size_t Architecture::param_count() const noexcept {
  const std::size_t f = feature_dim();
  const std::size_t c = class_count;
  switch (kind) {
    case BackboneKind::logistic: return c * f + c;
    case BackboneKind::mlp: return hidden * f + hidden + c * hidden + c;
    case BackboneKind::bilinear: return c * embedding_dim * embedding_dim + c;
  }
  return 0;
}

void Architecture::validate() const {
  if (embedding_dim == 0) throw ConfigError("architecture: embedding_dim must be >= 1");
  if (class_count < 2) throw ConfigError("architecture: class_count must be >= 2");
  if (kind == BackboneKind::mlp && hidden == 0) {
    throw ConfigError("architecture: mlp hidden width must be >= 1");
  }
  if (!(input_scale > 0.0) || !std::isfinite(input_scale)) {
    throw ConfigError("architecture: input_scale must be positive and finite");
  }
}

ModelState::ModelState(Architecture arch, RealVector params)
    : arch_(arch), params_(std::move(params)) {
  arch_.validate();
  require_same_length(params_.size(), arch_.param_count(), "ModelState params");
}

ModelState init_model(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng(seed);
  return {arch, sample_uniform(rng, -0.1, 0.1, arch.param_count())};
}

ModelState zero_model(const Architecture& arch) {
  arch.validate();
  return {arch, zeros(arch.param_count())};
}

namespace {

// Logits for one input. For the mlp the hidden activations are left in
// `hidden` for the backward pass.
void compute_logits(const ModelState& model, std::span<const double> x,
                    std::span<double> logits, std::vector<double>& hidden) {
  const Architecture& a = model.arch();
  const double* p = model.params().data();
  const std::size_t c_count = a.class_count;
  const double s = a.input_scale;

  switch (a.kind) {
    case BackboneKind::logistic: {
      const std::size_t f = a.feature_dim();
      const double* w = p;
      const double* b = p + c_count * f;
      for (std::size_t c = 0; c < c_count; ++c) {
        double z = 0.0;
        for (std::size_t k = 0; k < f; ++k) z += w[c * f + k] * x[k];
        logits[c] = s * z + b[c];
      }
      break;
    }
    case BackboneKind::mlp: {
      const std::size_t f = a.feature_dim();
      const std::size_t h = a.hidden;
      const double* w1 = p;
      const double* b1 = w1 + h * f;
      const double* w2 = b1 + h;
      const double* b2 = w2 + c_count * h;
      hidden.resize(h);
      for (std::size_t j = 0; j < h; ++j) {
        double z = 0.0;
        for (std::size_t k = 0; k < f; ++k) z += w1[j * f + k] * x[k];
        hidden[j] = std::tanh(s * z + b1[j]);
      }
      for (std::size_t c = 0; c < c_count; ++c) {
        double z = b2[c];
        for (std::size_t j = 0; j < h; ++j) z += w2[c * h + j] * hidden[j];
        logits[c] = z;
      }
      break;
    }
    case BackboneKind::bilinear: {
      const std::size_t d = a.embedding_dim;
      const auto u = x.subspan(0, d);
      const auto v = x.subspan(d, d);
      const double* b = p + c_count * d * d;
      for (std::size_t c = 0; c < c_count; ++c) {
        const double* w = p + c * d * d;
        double z = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          double row = 0.0;
          for (std::size_t j = 0; j < d; ++j) row += w[i * d + j] * v[j];
          z += u[i] * row;
        }
        logits[c] = s * s * z + b[c];
      }
      break;
    }
  }
}

void softmax_inplace(std::span<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    total += v;
  }
  for (double& v : z) v /= total;
}

void check_features(const ModelState& model, const FeatureVector& features) {
  require_same_length(features.size(), model.arch().feature_dim(), "backbone features");
}

}  // namespace

void validate_sample(const ModelState& model, const Sample& sample) {
  check_features(model, sample.features);
  if (sample.label >= model.class_count()) {
    throw DomainError("label " + std::to_string(sample.label) + " out of range for " +
                      std::to_string(model.class_count()) + " classes");
  }
}

RealVector forward(const ModelState& model, const FeatureVector& features) {
  check_features(model, features);
  RealVector probs(model.class_count());
  std::vector<double> hidden;
  compute_logits(model, features.span(), probs.span(), hidden);
  softmax_inplace(probs.span());
  require_finite(probs.span(), "forward");
  return probs;
}

std::size_t predict_class(const ModelState& model, const FeatureVector& features) {
  const RealVector p = forward(model, features);
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

double per_example_loss(const ModelState& model, const Sample& sample) {
  validate_sample(model, sample);
  const RealVector p = forward(model, sample.features);
  return -std::log(std::max(p[sample.label], kProbabilityFloor));
}

double accumulate_gradient(const ModelState& model, const Sample& sample, double weight,
                           RealVector& out) {
  validate_sample(model, sample);
  require_same_length(out.size(), model.params().size(), "gradient accumulator");

  const Architecture& a = model.arch();
  const std::size_t c_count = a.class_count;
  const double s = a.input_scale;
  const auto x = sample.features.span();

  std::vector<double> delta(c_count);
  std::vector<double> hidden;
  compute_logits(model, x, delta, hidden);
  softmax_inplace(delta);

  const double loss = -std::log(std::max(delta[sample.label], kProbabilityFloor));
  // The gradient is that of the unclamped cross-entropy, p - onehot(label).
  // It agrees with the clamped loss wherever p[label] >= 1e-12 and keeps a
  // confidently wrong model from stalling at zero gradient.
  if (weight == 0.0) return loss;

  delta[sample.label] -= 1.0;
  for (double& d : delta) d *= weight;

  double* g = out.data();
  switch (a.kind) {
    case BackboneKind::logistic: {
      const std::size_t f = a.feature_dim();
      double* gw = g;
      double* gb = g + c_count * f;
      for (std::size_t c = 0; c < c_count; ++c) {
        const double dc = delta[c] * s;
        for (std::size_t k = 0; k < f; ++k) gw[c * f + k] += dc * x[k];
        gb[c] += delta[c];
      }
      break;
    }
    case BackboneKind::mlp: {
      const std::size_t f = a.feature_dim();
      const std::size_t h = a.hidden;
      const double* w2 = model.params().data() + h * f + h;
      double* gw1 = g;
      double* gb1 = gw1 + h * f;
      double* gw2 = gb1 + h;
      double* gb2 = gw2 + c_count * h;
      for (std::size_t c = 0; c < c_count; ++c) {
        for (std::size_t j = 0; j < h; ++j) gw2[c * h + j] += delta[c] * hidden[j];
        gb2[c] += delta[c];
      }
      for (std::size_t j = 0; j < h; ++j) {
        double back = 0.0;
        for (std::size_t c = 0; c < c_count; ++c) back += w2[c * h + j] * delta[c];
        const double dz = back * (1.0 - hidden[j] * hidden[j]);
        const double dzs = dz * s;
        for (std::size_t k = 0; k < f; ++k) gw1[j * f + k] += dzs * x[k];
        gb1[j] += dz;
      }
      break;
    }
    case BackboneKind::bilinear: {
      const std::size_t d = a.embedding_dim;
      const auto u = x.subspan(0, d);
      const auto v = x.subspan(d, d);
      double* gb = g + c_count * d * d;
      for (std::size_t c = 0; c < c_count; ++c) {
        double* gw = g + c * d * d;
        const double dc = delta[c] * s * s;
        for (std::size_t i = 0; i < d; ++i) {
          const double ui = dc * u[i];
          for (std::size_t j = 0; j < d; ++j) gw[i * d + j] += ui * v[j];
        }
        gb[c] += delta[c];
      }
      break;
    }
  }
  return loss;
}

RealVector per_example_gradient(const ModelState& model, const Sample& sample) {
  RealVector g(model.params().size());
  accumulate_gradient(model, sample, 1.0, g);
  require_finite(g.span(), "per_example_gradient");
  return g;
}

}  // namespace mwr
