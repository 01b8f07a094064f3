#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "diffid/diffusion/denoiser.hpp"
#include "diffid/diffusion/loss.hpp"
#include "diffid/diffusion/schedule.hpp"

namespace diffid::diffusion {

/// Plain SGD; each step moves the parameters by
/// learning_rate * pixels * gradient.
struct FineTuneConfig {
  std::size_t steps = 1000;
  double learning_rate = 0.125;
  std::uint64_t seed = 0;
  std::size_t batch_size = 4;

  void validate() const;
};

struct FineTuneResult {
  std::vector<double> loss_trace;  // one batch loss per step, before the update
};

/// SGD on the prior-preservation objective. Each step draws `batch_size`
/// identity images and `batch_size` reference images uniformly, with t and t'
/// sampled independently per item. Mutates `model` in place.
FineTuneResult fine_tune(Denoiser& model, std::span<const Image> identity_images,
                         std::span<const double> identity_condition, std::span<const Image> reference_images,
                         std::span<const double> reference_condition, const FineTuneConfig& cfg,
                         const LossConfig& loss_cfg, const NoiseSchedule& schedule);

}  // namespace diffid::diffusion
