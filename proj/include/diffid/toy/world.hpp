#pragma once

#include <cstdint>
#include <string>

#include "diffid/dataset/manifest.hpp"
#include "diffid/image.hpp"

namespace diffid::toy {

struct SpriteDatasetSpec {
  std::string source = "toy";
  std::size_t identities = 3;
  std::size_t frames = 8;
  ImageShape shape{};
  std::uint64_t seed = 0;
  std::size_t cameras = 2;
  /// Second half of the identities become query (camera c1, first frame)
  /// and gallery (other frames, camera c2) entries instead of train.
  bool eval_splits = false;
  double noise = 0.03;
};

/// Renders the dataset to <dir>/<source>/<identity>/fNNN.ppm and writes
/// <dir>/manifest.tsv. Identity i is named pNNNN and drawn from
/// random_identity(mix_seed(seed, i)).
dataset::DatasetManifest write_sprite_dataset(const std::string& dir, const SpriteDatasetSpec& spec);

}  // namespace diffid::toy
