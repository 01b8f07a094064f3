#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "diffid/image.hpp"

namespace diffid::diffusion {

enum class ScheduleKind { linear, cosine };

ScheduleKind parse_schedule_kind(const std::string& name);
std::string to_string(ScheduleKind kind);

/// Variance-preserving schedule: alpha_t^2 + sigma_t^2 = 1 at every step.
/// Timesteps are 1-based: t in [1, steps()].
class NoiseSchedule {
 public:
  NoiseSchedule(std::vector<double> alphas, std::vector<double> sigmas);

  std::size_t steps() const { return alphas_.size(); }
  double alpha(std::size_t t) const;
  double sigma(std::size_t t) const;
  const std::vector<double>& alphas() const { return alphas_; }
  const std::vector<double>& sigmas() const { return sigmas_; }

 private:
  std::vector<double> alphas_;
  std::vector<double> sigmas_;
};

inline constexpr double kLinearBetaStart = 1e-4;
inline constexpr double kLinearBetaEnd = 2e-2;
inline constexpr double kCosineOffset = 0.008;

/// linear: beta ramps linearly from kLinearBetaStart to kLinearBetaEnd and
///         alpha_t^2 is the running product of (1 - beta).
/// cosine: alpha_t = cos(((t/T + s)/(1 + s)) * pi/2) / cos((s/(1 + s)) * pi/2).
NoiseSchedule make_schedule(long long steps, ScheduleKind kind);

/// z_t = alpha_t * x + sigma_t * eps.
Image add_noise(const Image& x, const Image& eps, std::size_t t, const NoiseSchedule& schedule);

}  // namespace diffid::diffusion
