#pragma once

#include <cstdint>
#include <span>

#include "diffid/diffusion/denoiser.hpp"
#include "diffid/diffusion/schedule.hpp"

namespace diffid::diffusion {

/// Deterministic DDIM-style sampler for a clean-image predictor. Starts from
/// seeded Gaussian noise at t = T, visits `n_steps` evenly spaced timesteps
/// down to t = 1 and returns the final prediction clamped to [-1, 1].
Image sample(const Denoiser& model, std::span<const double> condition, std::uint64_t seed, std::size_t n_steps,
             const NoiseSchedule& schedule);

/// The visited timesteps, strictly decreasing, first T and last 1.
std::vector<std::size_t> sampling_timesteps(std::size_t n_steps, std::size_t timesteps);

}  // namespace diffid::diffusion
