#pragma once

#include <span>
#include <vector>

#include "diffid/checkpoint.hpp"
#include "diffid/image.hpp"

namespace diffid::nn {

struct BackboneConfig {
  ImageShape input{3, 16, 8};  // images are resized to this before the conv
  std::size_t conv_channels = 8;
  std::size_t embedding_dim = 32;

  bool operator==(const BackboneConfig&) const = default;
};

/// conv3x3 (zero pad) -> ReLU -> 2x2 average pool -> dense -> embedding.
/// All parameters live in one flat vector:
///   conv weights [out][in][3][3], conv bias [out], dense weights
///   [embedding][features], dense bias [embedding].
class Backbone {
 public:
  explicit Backbone(BackboneConfig config);
  Backbone(BackboneConfig config, std::vector<double> parameters);
  static Backbone initialized(BackboneConfig config, std::uint64_t seed);

  /// Per-example intermediate values needed by backward().
  struct Trace {
    Image input;
    std::vector<double> conv;  // post-ReLU activations
    std::vector<double> pooled;
    std::vector<double> embedding;
  };

  /// Resizes to the configured input shape.
  Image prepare(const Image& image) const;
  /// `input` must already have the configured shape.
  Trace forward(const Image& input) const;
  std::vector<double> embed(const Image& image) const;
  void backward(const Trace& trace, std::span<const double> d_embedding, std::span<double> grad) const;

  const BackboneConfig& config() const { return config_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }
  std::size_t feature_count() const;
  static std::size_t parameter_count(const BackboneConfig& config);

  Checkpoint to_checkpoint() const;
  static Backbone from_checkpoint(const Checkpoint& ckpt);

 private:
  BackboneConfig config_;
  std::vector<double> params_;
};

/// Linear classifier over embeddings.
class LinearHead {
 public:
  LinearHead(std::size_t inputs, std::size_t classes);
  static LinearHead initialized(std::size_t inputs, std::size_t classes, std::uint64_t seed);

  std::vector<double> logits(std::span<const double> x) const;
  /// Accumulates parameter gradients and returns d(loss)/d(x).
  std::vector<double> backward(std::span<const double> x, std::span<const double> d_logits,
                               std::span<double> grad) const;

  std::size_t inputs() const { return inputs_; }
  std::size_t classes() const { return classes_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }

 private:
  std::size_t inputs_, classes_;
  std::vector<double> params_;  // weights [classes][inputs], then bias [classes]
};

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

double cosine_similarity(std::span<const double> a, std::span<const double> b);
void normalize(std::span<double> v);

}  // namespace diffid::nn
