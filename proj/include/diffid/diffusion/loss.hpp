#pragma once

#include <span>
#include <vector>

#include "diffid/diffusion/denoiser.hpp"
#include "diffid/diffusion/schedule.hpp"

namespace diffid::diffusion {

/// One term of the objective: a clean target, its text condition, the
/// timestep and the noise used to corrupt it.
struct TrainingItem {
  Image image;
  std::vector<double> condition;
  std::size_t t = 1;
  Image noise;
};

struct LossConfig {
  double lambda = 1.0;  // prior-preservation weight
  // Per-timestep weights indexed by t-1; empty means all ones.
  std::vector<double> weight_t;
  std::vector<double> weight_t_prime;

  void validate(std::size_t timesteps) const;
};

struct LossBreakdown {
  double total = 0.0;
  double reconstruction = 0.0;  // mean_i w_t ||x_hat - x||^2 / pixels
  double prior = 0.0;           // same over the reference batch, unweighted by lambda
};

/// reconstruction + lambda * prior, where each term is the weighted squared
/// error between the denoiser's prediction from alpha_t x + sigma_t eps and
/// the clean target, averaged over pixels and over items.
LossBreakdown prior_preservation_loss(const Denoiser& model, std::span<const TrainingItem> batch,
                                      std::span<const TrainingItem> reference_batch, const LossConfig& cfg,
                                      const NoiseSchedule& schedule);

/// Same value plus the analytic gradient with respect to model.parameters().
LossBreakdown prior_preservation_loss_and_gradient(const Denoiser& model, std::span<const TrainingItem> batch,
                                                   std::span<const TrainingItem> reference_batch,
                                                   const LossConfig& cfg, const NoiseSchedule& schedule,
                                                   std::vector<double>& gradient);

}  // namespace diffid::diffusion
