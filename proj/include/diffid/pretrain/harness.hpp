#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diffid/checkpoint.hpp"
#include "diffid/dataset/manifest.hpp"
#include "diffid/metrics/retrieval.hpp"
#include "diffid/nn/backbone.hpp"
#include "diffid/nn/training.hpp"

namespace diffid::pretrain {

struct PretrainConfig {
  nn::BackboneConfig backbone{};
  nn::TrainingConfig training{};

  void validate() const;
  bool operator==(const PretrainConfig& o) const;
};

/// Flat key-value form used by config files: epochs, learning_rate,
/// weight_decay, warmup_epochs, batch_size, seed, mixup, cutmix,
/// random_erasing, input_height, input_width, conv_channels, embedding_dim.
std::map<std::string, std::string> to_values(const PretrainConfig& cfg);
/// Unknown keys and unparsable values are appended to `violations` as
/// "<prefix><key>: <reason>".
PretrainConfig from_values(const std::map<std::string, std::string>& values, std::vector<std::string>& violations,
                           const std::string& prefix = "");

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<double> epoch_losses;
  std::vector<double> lr_trace;
  double train_accuracy = 0.0;
  std::vector<std::string> labels;  // class index -> identity key
};

/// Identity classification over the given images; labels are identity
/// keys. Needs at least two distinct labels.
PretrainResult pretrain(std::span<const Image> images, std::span<const std::string> labels,
                        const PretrainConfig& cfg);
/// Reads the manifest's images from `base_dir`.
PretrainResult pretrain(const dataset::DatasetManifest& manifest, const std::string& base_dir,
                        const PretrainConfig& cfg);

/// Loads every record's image, in record order.
std::vector<Image> load_images(const dataset::DatasetManifest& manifest, const std::string& base_dir);

// --- Subsampling -----------------------------------------------------------------

enum class SubsetMode { fs, ss };

struct SubsetSpec {
  SubsetMode mode = SubsetMode::fs;
  double fraction = 1.0;
  std::uint64_t seed = 0;
};

/// Fs: every identity keeps max(1, ceil(fraction * count)) images.
/// Ss: max(1, floor(fraction * identities)) identities keep all images.
/// The choice is seeded and uniform; record order is preserved.
dataset::DatasetManifest subsample(const dataset::DatasetManifest& manifest, const SubsetSpec& spec);
std::size_t fs_keep_count(double fraction, std::size_t count);
std::size_t ss_keep_count(double fraction, std::size_t identities);

// --- Fine-tune and evaluate --------------------------------------------------------

struct FinetuneConfig {
  nn::TrainingConfig training{};  // epochs = 0 evaluates without training
  nn::BackboneConfig backbone{};  // used only without a checkpoint
  bool cross_camera = true;
  std::size_t max_rank = 10;

  FinetuneConfig() {
    training.epochs = 5;
    training.warmup_epochs = 1;
    training.batch_size = 32;
    training.learning_rate = 3.5e-4;
  }
};

struct TargetData {
  std::vector<Image> train;
  std::vector<std::string> train_labels;
  std::vector<Image> query;
  std::vector<metrics::RetrievalEntry> query_entries;
  std::vector<Image> gallery;
  std::vector<metrics::RetrievalEntry> gallery_entries;
};

/// Splits a manifest by its "train", "query" and "gallery" tags. Missing
/// tags raise std::invalid_argument.
TargetData load_target(const dataset::DatasetManifest& manifest, const std::string& base_dir);

struct FinetuneResult {
  metrics::RetrievalResult final;
  std::vector<double> map_trace;  // one entry per fine-tune epoch
  std::vector<metrics::RetrievalResult> per_epoch;
};

metrics::RetrievalResult evaluate_backbone(const nn::Backbone& backbone, const TargetData& target, bool cross_camera,
                                           std::size_t max_rank);

/// Starts from the checkpoint's backbone, or a random one seeded by
/// cfg.training.seed, then trains an identity head on the train split and
/// evaluates on query/gallery after every epoch.
FinetuneResult finetune_eval(const std::optional<Checkpoint>& checkpoint, const TargetData& target,
                             const FinetuneConfig& cfg);

// --- Run ledger ----------------------------------------------------------------------

struct RunRecord {
  std::string run_id;
  std::string config_hash;
  double map = 0.0;
  double rank1 = 0.0;
};

std::string config_hash(const std::map<std::string, std::string>& values);
/// Appends "run_id<TAB>config_hash<TAB>map<TAB>rank1".
void append_run_record(const std::string& path, const RunRecord& record);
std::vector<RunRecord> read_run_ledger(const std::string& path);

}  // namespace diffid::pretrain
