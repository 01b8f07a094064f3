#include "diffid/toy/world.hpp"

#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "diffid/random.hpp"
#include "diffid/toy/sprites.hpp"

namespace diffid::toy {

dataset::DatasetManifest write_sprite_dataset(const std::string& dir, const SpriteDatasetSpec& spec) {
  if (spec.identities == 0 || spec.frames == 0) throw std::invalid_argument("sprite dataset needs identities and frames");
  if (spec.eval_splits && (spec.identities < 2 || spec.frames < 2)) {
    throw std::invalid_argument("evaluation splits need at least 2 identities and 2 frames");
  }
  namespace fs = std::filesystem;
  dataset::DatasetManifest manifest;
  manifest.crop = {spec.shape.height, spec.shape.width};
  const std::size_t train_ids = spec.eval_splits ? (spec.identities + 1) / 2 : spec.identities;
  char name[32];
  for (std::size_t i = 0; i < spec.identities; ++i) {
    const auto identity = random_identity(mix_seed(spec.seed, i));
    std::snprintf(name, sizeof name, "p%04zu", i);
    const std::string id = name;
    fs::create_directories(fs::path(dir) / spec.source / id);
    for (std::size_t f = 0; f < spec.frames; ++f) {
      std::snprintf(name, sizeof name, "f%03zu.ppm", f);
      dataset::ManifestRecord r;
      r.path = spec.source + "/" + id + "/" + name;
      r.identity = id;
      r.source = spec.source;
      r.camera = spec.cameras == 0 ? "" : "c" + std::to_string(f % spec.cameras + 1);
      if (i >= train_ids) {
        r.split = f == 0 ? "query" : "gallery";
        r.camera = f == 0 ? "c1" : "c2";
      }
      write_pnm((fs::path(dir) / r.path).string(),
                render_sprite(identity, spec.shape, mix_seed(mix_seed(spec.seed, i), f + 1), spec.noise));
      manifest.records.push_back(std::move(r));
    }
  }
  manifest.sort();
  dataset::write_manifest((fs::path(dir) / dataset::kManifestFileName).string(), manifest);
  return manifest;
}

}  // namespace diffid::toy
