#pragma once

#include <memory>
#include <span>
#include <vector>

#include "diffid/checkpoint.hpp"
#include "diffid/image.hpp"

namespace diffid::diffusion {

/// Clean-image predictor x_hat(z_t, t, c). Implementations must be
/// deterministic and safe for concurrent const use.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual ImageShape image_shape() const = 0;
  virtual std::size_t condition_dim() const = 0;

  virtual std::span<const double> parameters() const = 0;
  virtual std::span<double> parameters() = 0;

  virtual Image predict(const Image& noised, std::size_t t, std::span<const double> condition) const = 0;

  /// Accumulates J^T * upstream into `grad`, where J is the Jacobian of
  /// predict() with respect to parameters().
  virtual void backward(const Image& noised, std::size_t t, std::span<const double> condition,
                        const Image& upstream, std::span<double> grad) const = 0;

  virtual std::unique_ptr<Denoiser> clone() const = 0;
};

struct ToyDenoiserConfig {
  ImageShape shape{};
  std::size_t condition_dim = 16;
  std::size_t time_buckets = 8;
  std::size_t timesteps = 1000;  // schedule length the buckets partition

  bool operator==(const ToyDenoiserConfig&) const = default;
};

/// Per-pixel gated blend of the noised input and a condition-driven template:
///
///   h_p     = sum_k U[p,k] c_k + b_p
///   x_hat_p = G[b,p] z_p + (1 - G[b,p]) tanh(h_p),   b = bucket(t)
///
/// Parameter layout: U (pixels x condition_dim, row-major), then b (pixels),
/// then G (time_buckets x pixels).
class ToyDenoiser final : public Denoiser {
 public:
  explicit ToyDenoiser(ToyDenoiserConfig config);
  ToyDenoiser(ToyDenoiserConfig config, std::vector<double> parameters);

  /// Small Gaussian template weights, zero bias, gates falling linearly from
  /// near 1 in the lowest-noise bucket to near 0 in the highest.
  static ToyDenoiser initialized(ToyDenoiserConfig config, std::uint64_t seed);

  ImageShape image_shape() const override { return config_.shape; }
  std::size_t condition_dim() const override { return config_.condition_dim; }
  std::span<const double> parameters() const override { return params_; }
  std::span<double> parameters() override { return params_; }

  Image predict(const Image& noised, std::size_t t, std::span<const double> condition) const override;
  void backward(const Image& noised, std::size_t t, std::span<const double> condition, const Image& upstream,
                std::span<double> grad) const override;
  std::unique_ptr<Denoiser> clone() const override { return std::make_unique<ToyDenoiser>(*this); }

  const ToyDenoiserConfig& config() const { return config_; }
  static std::size_t parameter_count(const ToyDenoiserConfig& config);
  std::size_t bucket(std::size_t t) const;

  Checkpoint to_checkpoint() const;
  static ToyDenoiser from_checkpoint(const Checkpoint& ckpt);

 private:
  void check_inputs(const Image& noised, std::size_t t, std::span<const double> condition) const;

  ToyDenoiserConfig config_;
  std::vector<double> params_;
};

}  // namespace diffid::diffusion
