#include "diffid/diffusion/backend.hpp"

#include "diffid/diffusion/sampler.hpp"
#include "diffid/errors.hpp"
#include "diffid/prompt/text_embedding.hpp"
#include "diffid/random.hpp"

namespace diffid::diffusion {

ToyBackend::ToyBackend(ToyBackendSettings settings)
    : ToyBackend(settings, ToyDenoiser::initialized(settings.model, settings.base_seed)) {}

ToyBackend::ToyBackend(ToyBackendSettings settings, ToyDenoiser base_model)
    : settings_(std::move(settings)),
      schedule_(make_schedule(static_cast<long long>(settings_.model.timesteps), settings_.schedule)),
      base_(std::move(base_model)) {
  settings_.fine_tune.validate();
  settings_.loss.validate(schedule_.steps());
  models_.emplace(diversity::model_id(base_), base_);
}

diversity::ReferenceSet ToyBackend::reference_set(const prompt::PromptBundle& prompts, std::size_t n,
                                                  std::uint64_t seed) {
  return diversity::build_reference_set(base_, prompts, n, seed, schedule_, settings_.sample_steps);
}

std::string ToyBackend::fine_tune(std::span<const Image> images, const prompt::PromptBundle& prompts,
                                  const diversity::ReferenceSet& reference, std::uint64_t seed) {
  if (reference.source_model_id != diversity::model_id(base_)) {
    throw std::invalid_argument("reference set was not sampled from this backend's base model");
  }
  ToyDenoiser tuned = base_;
  auto cfg = settings_.fine_tune;
  cfg.seed = seed;
  auto result = diversity::fine_tune_identity(tuned, images, prompts, reference, cfg, settings_.loss, schedule_);
  auto handle = diversity::model_id(tuned);
  std::lock_guard lock(mutex_);
  models_.insert_or_assign(handle, std::move(tuned));
  traces_[handle] = std::move(result.loss_trace);
  return handle;
}

ToyDenoiser ToyBackend::model(const std::string& handle) const {
  std::lock_guard lock(mutex_);
  auto it = models_.find(handle);
  if (it == models_.end()) throw NotFoundError("toy backend has no model for handle '" + handle + "'");
  return it->second;
}

std::vector<Image> ToyBackend::sample(const std::string& handle, const std::string& prompt, std::uint64_t seed,
                                      std::size_t n) {
  const ToyDenoiser m = model(handle);
  const auto condition = prompt::embed_text(prompt, m.condition_dim());
  std::vector<Image> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(diffusion::sample(m, condition, mix_seed(seed, i), settings_.sample_steps, schedule_));
  }
  return out;
}

void ToyBackend::export_handle(const std::string& handle, const std::string& path) {
  save_checkpoint(path, model(handle).to_checkpoint());
}

std::string ToyBackend::import_handle(const std::string& path) {
  auto m = ToyDenoiser::from_checkpoint(load_checkpoint(path));
  if (!(m.config() == settings_.model)) throw IntegrityError("checkpoint " + path + " does not match backend model shape");
  auto handle = diversity::model_id(m);
  std::lock_guard lock(mutex_);
  models_.insert_or_assign(handle, std::move(m));
  return handle;
}

std::vector<double> ToyBackend::loss_trace(const std::string& handle) const {
  std::lock_guard lock(mutex_);
  auto it = traces_.find(handle);
  return it == traces_.end() ? std::vector<double>{} : it->second;
}

}  // namespace diffid::diffusion
