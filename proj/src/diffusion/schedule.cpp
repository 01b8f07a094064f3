#include "diffid/diffusion/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace diffid::diffusion {

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "linear") return ScheduleKind::linear;
  if (name == "cosine") return ScheduleKind::cosine;
  throw std::invalid_argument("unknown schedule kind '" + name + "'");
}

std::string to_string(ScheduleKind kind) { return kind == ScheduleKind::linear ? "linear" : "cosine"; }

NoiseSchedule::NoiseSchedule(std::vector<double> alphas, std::vector<double> sigmas)
    : alphas_(std::move(alphas)), sigmas_(std::move(sigmas)) {
  if (alphas_.empty() || alphas_.size() != sigmas_.size()) {
    throw std::invalid_argument("schedule needs matching, non-empty alpha and sigma sequences");
  }
}

double NoiseSchedule::alpha(std::size_t t) const {
  if (t < 1 || t > alphas_.size()) throw std::invalid_argument("timestep " + std::to_string(t) + " out of range");
  return alphas_[t - 1];
}

double NoiseSchedule::sigma(std::size_t t) const {
  if (t < 1 || t > sigmas_.size()) throw std::invalid_argument("timestep " + std::to_string(t) + " out of range");
  return sigmas_[t - 1];
}

NoiseSchedule make_schedule(long long steps, ScheduleKind kind) {
  if (steps < 1) throw std::invalid_argument("schedule needs at least one timestep, got " + std::to_string(steps));
  const auto n = static_cast<std::size_t>(steps);
  std::vector<double> alphas(n), sigmas(n);
  if (kind == ScheduleKind::linear) {
    double signal_var = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double beta = n == 1 ? kLinearBetaStart
                                 : kLinearBetaStart + (kLinearBetaEnd - kLinearBetaStart) * static_cast<double>(i) /
                                                          static_cast<double>(n - 1);
      signal_var *= 1.0 - beta;
      alphas[i] = std::sqrt(signal_var);
      sigmas[i] = std::sqrt(1.0 - signal_var);
    }
  } else {
    const double s = kCosineOffset;
    const double f0 = std::cos(s / (1.0 + s) * std::numbers::pi / 2.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double frac = static_cast<double>(i + 1) / static_cast<double>(n);
      const double a = std::cos((frac + s) / (1.0 + s) * std::numbers::pi / 2.0) / f0;
      alphas[i] = a;
      sigmas[i] = std::sqrt(1.0 - a * a);
    }
  }
  return NoiseSchedule(std::move(alphas), std::move(sigmas));
}

Image add_noise(const Image& x, const Image& eps, std::size_t t, const NoiseSchedule& schedule) {
  if (!(x.shape() == eps.shape())) {
    throw std::invalid_argument("add_noise: image " + to_string(x.shape()) + " and noise " + to_string(eps.shape()) +
                                " differ in shape");
  }
  const double a = schedule.alpha(t);
  const double s = schedule.sigma(t);
  Image z(x.shape());
  auto out = z.pixels();
  auto xs = x.pixels();
  auto es = eps.pixels();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * xs[i] + s * es[i];
  return z;
}

}  // namespace diffid::diffusion
