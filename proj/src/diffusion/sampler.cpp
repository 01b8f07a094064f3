#include "diffid/diffusion/sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "diffid/random.hpp"

namespace diffid::diffusion {

std::vector<std::size_t> sampling_timesteps(std::size_t n_steps, std::size_t timesteps) {
  if (n_steps < 1) throw std::invalid_argument("sampling needs at least one step");
  n_steps = std::min(n_steps, timesteps);
  std::vector<std::size_t> ts;
  if (n_steps == 1) return {timesteps};
  for (std::size_t i = 0; i < n_steps; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(n_steps - 1);
    const auto t = static_cast<std::size_t>(
        std::llround(static_cast<double>(timesteps) - frac * static_cast<double>(timesteps - 1)));
    if (ts.empty() || t < ts.back()) ts.push_back(t);
  }
  return ts;
}

Image sample(const Denoiser& model, std::span<const double> condition, std::uint64_t seed, std::size_t n_steps,
             const NoiseSchedule& schedule) {
  const auto ts = sampling_timesteps(n_steps, schedule.steps());
  Rng rng(seed);
  Image z(model.image_shape());
  rng.fill_normal(z.pixels());
  Image x_hat;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const std::size_t t = ts[i];
    x_hat = model.predict(z, t, condition);
    if (i + 1 == ts.size()) break;
    const std::size_t next = ts[i + 1];
    const double a = schedule.alpha(t), s = schedule.sigma(t);
    const double a_next = schedule.alpha(next), s_next = schedule.sigma(next);
    auto zp = z.pixels();
    auto xp = x_hat.pixels();
    for (std::size_t p = 0; p < zp.size(); ++p) {
      const double eps_hat = s > 0.0 ? (zp[p] - a * xp[p]) / s : 0.0;
      zp[p] = a_next * xp[p] + s_next * eps_hat;
    }
  }
  clamp_pixels(x_hat);
  return x_hat;
}

}  // namespace diffid::diffusion
