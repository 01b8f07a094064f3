#include "diffid/diffusion/loss.hpp"

#include <stdexcept>
#include <string>

namespace diffid::diffusion {

void LossConfig::validate(std::size_t timesteps) const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  for (const auto* w : {&weight_t, &weight_t_prime}) {
    if (!w->empty() && w->size() != timesteps) {
      throw std::invalid_argument("timestep weights must have one entry per timestep (" + std::to_string(timesteps) +
                                  ")");
    }
    for (double v : *w) {
      if (!(v >= 0.0)) throw std::invalid_argument("timestep weights must be non-negative");
    }
  }
}

namespace {

double weight_at(const std::vector<double>& weights, std::size_t t) { return weights.empty() ? 1.0 : weights[t - 1]; }

void check_preconditions(std::span<const TrainingItem> batch, std::span<const TrainingItem> reference_batch,
                         const LossConfig& cfg, const NoiseSchedule& schedule) {
  if (batch.empty()) throw std::invalid_argument("prior_preservation_loss: empty batch");
  cfg.validate(schedule.steps());
  if (cfg.lambda > 0.0 && reference_batch.empty()) {
    throw std::invalid_argument("prior_preservation_loss: lambda > 0 requires a non-empty reference batch");
  }
}

// Mean weighted squared error of one batch. When `gradient` is non-null the
// parameter gradient of `scale` times that mean is accumulated into it.
double batch_term(const Denoiser& model, std::span<const TrainingItem> items, const std::vector<double>& weights,
                  const NoiseSchedule& schedule, double scale, std::vector<double>* gradient) {
  if (items.empty()) return 0.0;
  const double n_items = static_cast<double>(items.size());
  double sum = 0.0;
  for (const auto& item : items) {
    const double w = weight_at(weights, item.t);
    const Image z = add_noise(item.image, item.noise, item.t, schedule);
    const Image pred = model.predict(z, item.t, item.condition);
    const double pixels = static_cast<double>(pred.size());
    auto p = pred.pixels();
    auto x = item.image.pixels();
    double sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) sq += (p[i] - x[i]) * (p[i] - x[i]);
    sum += w * sq / pixels;
    if (gradient != nullptr && w != 0.0 && scale != 0.0) {
      Image upstream(pred.shape());
      auto up = upstream.pixels();
      const double coeff = scale * w * 2.0 / (pixels * n_items);
      for (std::size_t i = 0; i < p.size(); ++i) up[i] = coeff * (p[i] - x[i]);
      model.backward(z, item.t, item.condition, upstream, *gradient);
    }
  }
  return sum / n_items;
}

}  // namespace

LossBreakdown prior_preservation_loss(const Denoiser& model, std::span<const TrainingItem> batch,
                                      std::span<const TrainingItem> reference_batch, const LossConfig& cfg,
                                      const NoiseSchedule& schedule) {
  check_preconditions(batch, reference_batch, cfg, schedule);
  LossBreakdown out;
  out.reconstruction = batch_term(model, batch, cfg.weight_t, schedule, 1.0, nullptr);
  out.prior = batch_term(model, reference_batch, cfg.weight_t_prime, schedule, cfg.lambda, nullptr);
  out.total = out.reconstruction + cfg.lambda * out.prior;
  return out;
}

LossBreakdown prior_preservation_loss_and_gradient(const Denoiser& model, std::span<const TrainingItem> batch,
                                                   std::span<const TrainingItem> reference_batch,
                                                   const LossConfig& cfg, const NoiseSchedule& schedule,
                                                   std::vector<double>& gradient) {
  check_preconditions(batch, reference_batch, cfg, schedule);
  gradient.assign(model.parameters().size(), 0.0);
  LossBreakdown out;
  out.reconstruction = batch_term(model, batch, cfg.weight_t, schedule, 1.0, &gradient);
  out.prior = batch_term(model, reference_batch, cfg.weight_t_prime, schedule, cfg.lambda, &gradient);
  out.total = out.reconstruction + cfg.lambda * out.prior;
  return out;
}

}  // namespace diffid::diffusion
