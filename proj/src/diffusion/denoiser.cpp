#include "diffid/diffusion/denoiser.hpp"

#include <cmath>
#include <stdexcept>

#include "diffid/errors.hpp"
#include "diffid/random.hpp"

namespace diffid::diffusion {
namespace {
constexpr const char* kCheckpointKind = "toy_denoiser";
}

std::size_t ToyDenoiser::parameter_count(const ToyDenoiserConfig& c) {
  const std::size_t pixels = c.shape.size();
  return pixels * c.condition_dim + pixels + c.time_buckets * pixels;
}

ToyDenoiser::ToyDenoiser(ToyDenoiserConfig config) : ToyDenoiser(config, std::vector<double>(parameter_count(config))) {}

ToyDenoiser::ToyDenoiser(ToyDenoiserConfig config, std::vector<double> parameters)
    : config_(config), params_(std::move(parameters)) {
  if (config_.shape.size() == 0 || config_.condition_dim == 0 || config_.time_buckets == 0 ||
      config_.timesteps == 0) {
    throw std::invalid_argument("toy denoiser dimensions must be positive");
  }
  if (params_.size() != parameter_count(config_)) {
    throw std::invalid_argument("toy denoiser expects " + std::to_string(parameter_count(config_)) +
                                " parameters, got " + std::to_string(params_.size()));
  }
}

ToyDenoiser ToyDenoiser::initialized(ToyDenoiserConfig config, std::uint64_t seed) {
  ToyDenoiser model(config);
  Rng rng(seed);
  const std::size_t n_template = config.shape.size() * config.condition_dim;
  const double scale = 0.5 / std::sqrt(static_cast<double>(config.condition_dim));
  rng.fill_normal(std::span<double>(model.params_).first(n_template), scale);
  const std::size_t pixels = config.shape.size();
  auto gates = std::span<double>(model.params_).last(config.time_buckets * pixels);
  for (std::size_t b = 0; b < config.time_buckets; ++b) {
    const double g = 1.0 - (static_cast<double>(b) + 0.5) / static_cast<double>(config.time_buckets);
    std::fill_n(gates.begin() + static_cast<std::ptrdiff_t>(b * pixels), pixels, g);
  }
  return model;
}

std::size_t ToyDenoiser::bucket(std::size_t t) const {
  // t in [1, timesteps]; later steps clamp into the last bucket.
  const std::size_t idx = (std::min(t, config_.timesteps) - 1) * config_.time_buckets / config_.timesteps;
  return std::min(idx, config_.time_buckets - 1);
}

void ToyDenoiser::check_inputs(const Image& noised, std::size_t t, std::span<const double> condition) const {
  if (!(noised.shape() == config_.shape)) {
    throw std::invalid_argument("denoiser expects " + to_string(config_.shape) + " input, got " +
                                to_string(noised.shape()));
  }
  if (condition.size() != config_.condition_dim) {
    throw std::invalid_argument("denoiser expects a condition of width " + std::to_string(config_.condition_dim));
  }
  if (t < 1) throw std::invalid_argument("timestep must be >= 1");
}

Image ToyDenoiser::predict(const Image& noised, std::size_t t, std::span<const double> condition) const {
  check_inputs(noised, t, condition);
  const std::size_t pixels = config_.shape.size();
  const std::size_t k = config_.condition_dim;
  const double* u = params_.data();
  const double* bias = u + pixels * k;
  const double* gate = bias + pixels + bucket(t) * pixels;
  Image out(config_.shape);
  auto dst = out.pixels();
  auto z = noised.pixels();
  for (std::size_t p = 0; p < pixels; ++p) {
    double h = bias[p];
    const double* row = u + p * k;
    for (std::size_t j = 0; j < k; ++j) h += row[j] * condition[j];
    dst[p] = gate[p] * z[p] + (1.0 - gate[p]) * std::tanh(h);
  }
  return out;
}

void ToyDenoiser::backward(const Image& noised, std::size_t t, std::span<const double> condition,
                           const Image& upstream, std::span<double> grad) const {
  check_inputs(noised, t, condition);
  if (!(upstream.shape() == config_.shape) || grad.size() != params_.size()) {
    throw std::invalid_argument("denoiser backward: upstream or gradient buffer has the wrong size");
  }
  const std::size_t pixels = config_.shape.size();
  const std::size_t k = config_.condition_dim;
  const double* u = params_.data();
  const double* bias = u + pixels * k;
  const std::size_t gate_offset = pixels * k + pixels + bucket(t) * pixels;
  const double* gate = params_.data() + gate_offset;
  auto z = noised.pixels();
  auto g = upstream.pixels();
  for (std::size_t p = 0; p < pixels; ++p) {
    double h = bias[p];
    const double* row = u + p * k;
    for (std::size_t j = 0; j < k; ++j) h += row[j] * condition[j];
    const double th = std::tanh(h);
    grad[gate_offset + p] += g[p] * (z[p] - th);
    const double dh = g[p] * (1.0 - gate[p]) * (1.0 - th * th);
    if (dh == 0.0) continue;
    double* grow = grad.data() + p * k;
    for (std::size_t j = 0; j < k; ++j) grow[j] += dh * condition[j];
    grad[pixels * k + p] += dh;
  }
}

Checkpoint ToyDenoiser::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.kind = kCheckpointKind;
  ckpt.config = {
      {"channels", std::to_string(config_.shape.channels)},
      {"height", std::to_string(config_.shape.height)},
      {"width", std::to_string(config_.shape.width)},
      {"condition_dim", std::to_string(config_.condition_dim)},
      {"time_buckets", std::to_string(config_.time_buckets)},
      {"timesteps", std::to_string(config_.timesteps)},
  };
  ckpt.parameters = params_;
  return ckpt;
}

ToyDenoiser ToyDenoiser::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != kCheckpointKind) throw IntegrityError("checkpoint kind '" + ckpt.kind + "' is not a toy denoiser");
  auto num = [&](const char* key) { return static_cast<std::size_t>(std::stoull(ckpt.require(key))); };
  ToyDenoiserConfig cfg;
  cfg.shape = {num("channels"), num("height"), num("width")};
  cfg.condition_dim = num("condition_dim");
  cfg.time_buckets = num("time_buckets");
  cfg.timesteps = num("timesteps");
  return ToyDenoiser(cfg, ckpt.parameters);
}

}  // namespace diffid::diffusion
