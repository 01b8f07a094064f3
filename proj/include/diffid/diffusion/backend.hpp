#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "diffid/diffusion/denoiser.hpp"
#include "diffid/diffusion/fine_tune.hpp"
#include "diffid/diffusion/schedule.hpp"
#include "diffid/diversity/reference_set.hpp"
#include "diffid/prompt/prompts.hpp"

namespace diffid::diffusion {

/// Contract for a text-to-image generator. Handles are opaque strings that
/// name a fine-tuned model state inside the backend. The toy engine below is
/// one implementation; full-scale models plug in behind the same calls.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;

  virtual const std::string& id() const = 0;

  /// Reference images from the untouched base model under the identity-free
  /// prompt.
  virtual diversity::ReferenceSet reference_set(const prompt::PromptBundle& prompts, std::size_t n,
                                                std::uint64_t seed) = 0;

  virtual std::string fine_tune(std::span<const Image> images, const prompt::PromptBundle& prompts,
                                const diversity::ReferenceSet& reference, std::uint64_t seed) = 0;

  virtual std::vector<Image> sample(const std::string& handle, const std::string& prompt, std::uint64_t seed,
                                    std::size_t n) = 0;

  /// Persist / restore a handle's model state so pipeline stages can resume.
  virtual void export_handle(const std::string& handle, const std::string& path) = 0;
  virtual std::string import_handle(const std::string& path) = 0;
};

struct ToyBackendSettings {
  ToyDenoiserConfig model{};
  std::uint64_t base_seed = 7;
  ScheduleKind schedule = ScheduleKind::linear;
  FineTuneConfig fine_tune{};
  LossConfig loss{};
  std::size_t sample_steps = 25;
};

/// Toy engine behind the backend contract. Thread-safe: distinct identities
/// can fine-tune and sample concurrently.
class ToyBackend final : public GenerationBackend {
 public:
  explicit ToyBackend(ToyBackendSettings settings);
  ToyBackend(ToyBackendSettings settings, ToyDenoiser base_model);

  const std::string& id() const override { return id_; }

  diversity::ReferenceSet reference_set(const prompt::PromptBundle& prompts, std::size_t n,
                                        std::uint64_t seed) override;
  std::string fine_tune(std::span<const Image> images, const prompt::PromptBundle& prompts,
                        const diversity::ReferenceSet& reference, std::uint64_t seed) override;
  std::vector<Image> sample(const std::string& handle, const std::string& prompt, std::uint64_t seed,
                            std::size_t n) override;
  void export_handle(const std::string& handle, const std::string& path) override;
  std::string import_handle(const std::string& path) override;

  const ToyDenoiser& base_model() const { return base_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  /// Loss trace of the fine-tune that produced `handle`, empty if imported.
  std::vector<double> loss_trace(const std::string& handle) const;

 private:
  ToyDenoiser model(const std::string& handle) const;

  std::string id_ = "toy";
  ToyBackendSettings settings_;
  NoiseSchedule schedule_;
  ToyDenoiser base_;
  mutable std::mutex mutex_;
  std::map<std::string, ToyDenoiser> models_;
  std::map<std::string, std::vector<double>> traces_;
};

}  // namespace diffid::diffusion
