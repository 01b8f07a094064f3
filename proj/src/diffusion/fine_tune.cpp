#include "diffid/diffusion/fine_tune.hpp"

#include <stdexcept>

#include "diffid/random.hpp"

namespace diffid::diffusion {

void FineTuneConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("fine-tune steps must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("fine-tune learning rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("fine-tune batch size must be >= 1");
}

namespace {

TrainingItem draw_item(std::span<const Image> images, std::span<const double> condition, std::size_t timesteps,
                       Rng& rng) {
  TrainingItem item;
  item.image = images[rng.index(images.size())];
  item.condition.assign(condition.begin(), condition.end());
  item.t = 1 + rng.index(timesteps);
  item.noise = Image(item.image.shape());
  rng.fill_normal(item.noise.pixels());
  return item;
}

}  // namespace

FineTuneResult fine_tune(Denoiser& model, std::span<const Image> identity_images,
                         std::span<const double> identity_condition, std::span<const Image> reference_images,
                         std::span<const double> reference_condition, const FineTuneConfig& cfg,
                         const LossConfig& loss_cfg, const NoiseSchedule& schedule) {
  cfg.validate();
  if (identity_images.empty()) throw std::invalid_argument("fine_tune: no identity images");
  if (loss_cfg.lambda > 0.0 && reference_images.empty()) {
    throw std::invalid_argument("fine_tune: lambda > 0 requires a non-empty reference set");
  }

  Rng rng(cfg.seed);
  FineTuneResult result;
  result.loss_trace.reserve(cfg.steps);
  std::vector<TrainingItem> batch(cfg.batch_size), refs;
  std::vector<double> grad;
  const double step_size = cfg.learning_rate * static_cast<double>(model.image_shape().size());
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (auto& item : batch) item = draw_item(identity_images, identity_condition, schedule.steps(), rng);
    refs.clear();
    if (loss_cfg.lambda > 0.0) {
      for (std::size_t i = 0; i < cfg.batch_size; ++i) {
        refs.push_back(draw_item(reference_images, reference_condition, schedule.steps(), rng));
      }
    }
    const auto loss = prior_preservation_loss_and_gradient(model, batch, refs, loss_cfg, schedule, grad);
    result.loss_trace.push_back(loss.total);
    auto params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= step_size * grad[i];
  }
  return result;
}

}  // namespace diffid::diffusion
