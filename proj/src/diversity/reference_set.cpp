#include "diffid/diversity/reference_set.hpp"

#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "diffid/binary_io.hpp"
#include "diffid/diffusion/sampler.hpp"
#include "diffid/errors.hpp"
#include "diffid/prompt/text_embedding.hpp"
#include "diffid/random.hpp"

namespace diffid::diversity {
namespace fs = std::filesystem;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::mutex& writer_lock(const std::string& key) {
  static std::mutex table_mutex;
  static std::map<std::string, std::mutex> locks;
  std::lock_guard guard(table_mutex);
  return locks[key];
}

}  // namespace

std::string model_id(const diffusion::Denoiser& model) {
  std::string bytes;
  binary::put_f64s(bytes, model.parameters());
  return "denoiser-" + hex64(fnv1a(bytes));
}

std::uint64_t reference_seed(std::uint64_t seed, std::size_t index) { return mix_seed(seed, index); }

ReferenceSet build_reference_set(const diffusion::Denoiser& base_model, const prompt::PromptBundle& bundle,
                                 std::size_t n, std::uint64_t seed, const diffusion::NoiseSchedule& schedule,
                                 std::size_t sample_steps) {
  if (n == 0) throw std::invalid_argument("reference set size must be positive");
  if (prompt::count_token(bundle.lpe_prompt, bundle.iir_token) != 0) {
    throw std::invalid_argument("reference prompt must not carry the identity token");
  }
  ReferenceSet set;
  set.prompt = bundle.lpe_prompt;
  set.source_model_id = model_id(base_model);
  const auto condition = prompt::embed_text(set.prompt, base_model.condition_dim());
  set.images.reserve(n);
  set.seeds.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = reference_seed(seed, i);
    set.seeds.push_back(s);
    set.images.push_back(diffusion::sample(base_model, condition, s, sample_steps, schedule));
  }
  return set;
}

ReferenceSetStore::ReferenceSetStore(std::string root) : root_(std::move(root)) {}

std::string ReferenceSetStore::id_for(const ReferenceSet& set) {
  std::string key = set.prompt;
  key += '\n';
  key += set.source_model_id;
  for (auto s : set.seeds) key += "\n" + std::to_string(s);
  return "rs-" + hex64(fnv1a(key));
}

bool ReferenceSetStore::contains(const std::string& id) const {
  return fs::exists(fs::path(root_) / id / "metadata.txt");
}

std::string ReferenceSetStore::store(const ReferenceSet& set) const {
  if (set.images.size() != set.seeds.size()) {
    throw std::invalid_argument("reference set has " + std::to_string(set.images.size()) + " images but " +
                                std::to_string(set.seeds.size()) + " seeds");
  }
  if (set.prompt.find('\n') != std::string::npos) throw std::invalid_argument("reference prompt contains a newline");
  const std::string id = id_for(set);
  const fs::path dir = fs::path(root_) / id;
  std::lock_guard guard(writer_lock(dir.string()));

  std::ostringstream meta;
  meta << "diffid-reference-set v1\n";
  meta << "prompt\t" << set.prompt << "\n";
  meta << "source_model_id\t" << set.source_model_id << "\n";
  meta << "count\t" << set.images.size() << "\n";
  for (std::size_t i = 0; i < set.images.size(); ++i) {
    std::string bytes;
    encode_image(bytes, set.images[i]);
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.f64img", i);
    binary::write_file_atomic((dir / name).string(), bytes);
    meta << "image\t" << name << "\t" << set.seeds[i] << "\t" << binary::crc32(bytes) << "\n";
  }
  // Metadata last: its presence marks the set complete.
  binary::write_file_atomic((dir / "metadata.txt").string(), meta.str());
  return id;
}

ReferenceSet ReferenceSetStore::load(const std::string& id) const {
  const fs::path dir = fs::path(root_) / id;
  if (!fs::exists(dir / "metadata.txt")) throw NotFoundError("no reference set with id '" + id + "' in " + root_);
  std::istringstream meta(binary::read_file((dir / "metadata.txt").string()));
  std::string line;
  std::getline(meta, line);
  if (line != "diffid-reference-set v1") throw IntegrityError("unrecognized reference set header in " + id);

  ReferenceSet set;
  std::size_t count = 0;
  while (std::getline(meta, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw IntegrityError("malformed metadata line in " + id);
    const std::string key = line.substr(0, tab);
    const std::string rest = line.substr(tab + 1);
    if (key == "prompt") {
      set.prompt = rest;
    } else if (key == "source_model_id") {
      set.source_model_id = rest;
    } else if (key == "count") {
      count = std::stoull(rest);
    } else if (key == "image") {
      std::istringstream fields(rest);
      std::string name;
      std::uint64_t seed = 0;
      std::uint32_t crc = 0;
      if (!(fields >> name >> seed >> crc)) throw IntegrityError("malformed image entry in " + id);
      const std::string bytes = binary::read_file((dir / name).string());
      if (binary::crc32(bytes) != crc) throw IntegrityError("checksum mismatch for " + name + " in reference set " + id);
      set.images.push_back(decode_image(bytes));
      set.seeds.push_back(seed);
    }
  }
  if (set.images.size() != count) throw IntegrityError("reference set " + id + " is missing images");
  return set;
}

diffusion::FineTuneResult fine_tune_identity(diffusion::Denoiser& model, std::span<const Image> identity_images,
                                             const prompt::PromptBundle& prompts, const ReferenceSet& reference,
                                             const diffusion::FineTuneConfig& cfg,
                                             const diffusion::LossConfig& loss_cfg,
                                             const diffusion::NoiseSchedule& schedule) {
  if (reference.prompt != prompts.lpe_prompt) {
    throw std::invalid_argument("reference set was drawn under '" + reference.prompt + "', expected '" +
                                prompts.lpe_prompt + "'");
  }
  const auto identity_condition = prompt::embed_text(prompts.enhanced_prompt, model.condition_dim());
  const auto reference_condition = prompt::embed_text(reference.prompt, model.condition_dim());
  return diffusion::fine_tune(model, identity_images, identity_condition, reference.images, reference_condition, cfg,
                              loss_cfg, schedule);
}

}  // namespace diffid::diversity
