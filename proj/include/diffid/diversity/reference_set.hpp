#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffid/diffusion/denoiser.hpp"
#include "diffid/diffusion/fine_tune.hpp"
#include "diffid/diffusion/schedule.hpp"
#include "diffid/prompt/prompts.hpp"

namespace diffid::diversity {

inline constexpr std::size_t kDefaultReferenceSetSize = 200;

/// Images sampled from the base model under the identity-free prompt. They
/// are the targets of the prior-preservation term.
struct ReferenceSet {
  std::vector<Image> images;
  std::string prompt;  // the bundle's lpe_prompt
  std::vector<std::uint64_t> seeds;
  std::string source_model_id;

  bool operator==(const ReferenceSet&) const = default;
};

/// Stable identifier of a model's parameter state, used as provenance.
std::string model_id(const diffusion::Denoiser& model);

/// Seed of the i-th reference image for a given root seed.
std::uint64_t reference_seed(std::uint64_t seed, std::size_t index);

/// Samples `n` images from `base_model` conditioned on bundle.lpe_prompt,
/// image i with reference_seed(seed, i). `base_model` must be the pre-fine-tune
/// checkpoint; the set records its model_id so callers can check.
ReferenceSet build_reference_set(const diffusion::Denoiser& base_model, const prompt::PromptBundle& bundle,
                                 std::size_t n, std::uint64_t seed, const diffusion::NoiseSchedule& schedule,
                                 std::size_t sample_steps = 25);

/// Directory-per-set cache. Each set lives under <root>/<id>/ as lossless
/// float64 image files plus a metadata.txt with prompt, seeds, model id and
/// per-image CRC32 checksums. Writers for one id are serialized in-process;
/// files are replaced atomically so concurrent readers see whole files.
class ReferenceSetStore {
 public:
  explicit ReferenceSetStore(std::string root);

  /// Returns the content-derived id the set was stored under.
  std::string store(const ReferenceSet& set) const;
  /// Throws NotFoundError for an unknown id and IntegrityError when a stored
  /// file fails its checksum.
  ReferenceSet load(const std::string& id) const;
  bool contains(const std::string& id) const;

  static std::string id_for(const ReferenceSet& set);

 private:
  std::string root_;
};

/// The identity fine-tune: the enhanced prompt conditions the identity
/// images, the IIR-free prompt conditions the reference images.
diffusion::FineTuneResult fine_tune_identity(diffusion::Denoiser& model, std::span<const Image> identity_images,
                                             const prompt::PromptBundle& prompts, const ReferenceSet& reference,
                                             const diffusion::FineTuneConfig& cfg,
                                             const diffusion::LossConfig& loss_cfg,
                                             const diffusion::NoiseSchedule& schedule);

}  // namespace diffid::diversity
