#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "diffid/dataset/manifest.hpp"
#include "diffid/diffusion/schedule.hpp"
#include "diffid/filter/filter.hpp"
#include "diffid/pretrain/harness.hpp"

namespace diffid::pipeline {

/// Fully defaulted pipeline settings. The text form is INI:
///
///   [pipeline]   work_dir, output_dir, seed, threads, max_identities
///   [sources]    manifests (comma separated)
///   [captioner]  name
///   [iir]        candidates, vocabulary (token list files, optional)
///   [prompt]     template
///   [generation] backend, reference_set_size, samples_per_identity,
///                fine_tune_steps, learning_rate, batch_size, lambda,
///                sample_steps, schedule, image_height, image_width,
///                condition_dim, time_buckets, timesteps, base_seed
///   [filter]     kind, tau, tau.<source>, calibrate_keep, clip_text,
///                epochs
///   [dataset]    crop_height, crop_width, cdf_thresholds, max_per_id,
///                min_per_id
///   [pretrain]   enabled plus the pretrain harness keys
struct PipelineConfig {
  std::vector<std::string> source_manifests;
  std::string work_dir = "work";
  std::string output_dir = "output";
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::size_t max_identities = 0;  // 0 = all

  std::string captioner = "stub";
  std::string iir_candidates_path;
  std::string vocabulary_path;
  std::string prompt_template = "a photo of {identity}, {caption}";

  std::string backend = "toy";
  std::size_t reference_set_size = 200;
  std::size_t samples_per_identity = 200;
  std::size_t fine_tune_steps = 1000;
  double learning_rate = 0.125;
  std::size_t batch_size = 4;
  double lambda = 1.0;
  std::size_t sample_steps = 25;
  diffusion::ScheduleKind schedule = diffusion::ScheduleKind::linear;
  std::size_t image_height = 32;
  std::size_t image_width = 16;
  std::size_t condition_dim = 16;
  std::size_t time_buckets = 8;
  std::size_t timesteps = 1000;
  std::uint64_t base_seed = 7;

  filter::FilterKind filter_kind = filter::FilterKind::reid_ctf;
  double tau = 0.5;
  std::map<std::string, double> source_tau;
  std::optional<double> calibrate_keep;  // replaces tau when set
  std::string clip_text = "a photo of a person";
  std::size_t filter_epochs = 30;

  dataset::CropSize crop{};
  std::vector<double> cdf_thresholds = {10, 30, 50, 70, 90, 110, 130, 150, 170, 190, 210, 230, 250};
  std::size_t max_per_id = 0;  // 0 = no cap
  std::size_t min_per_id = 0;

  bool pretrain_enabled = false;
  pretrain::PretrainConfig pretrain{};

  double tau_for(const std::string& source) const;
  bool operator==(const PipelineConfig& o) const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;

/// Reads the process environment.
EnvLookup process_environment();

/// Parses, applies DIFFID_<SECTION>_<KEY> overrides (upper-cased, dots
/// become underscores), fills defaults and validates. Every problem is
/// collected into one ValidationError.
PipelineConfig validate_config(const std::string& text, const EnvLookup& env = {});
/// Unreadable file raises IoError.
PipelineConfig load_config(const std::string& path, const EnvLookup& env = process_environment());

std::string serialize_config(const PipelineConfig& cfg);

}  // namespace diffid::pipeline
