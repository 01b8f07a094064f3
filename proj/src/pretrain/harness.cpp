#include "diffid/pretrain/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "diffid/binary_io.hpp"
#include "diffid/errors.hpp"
#include "diffid/parallel.hpp"
#include "diffid/random.hpp"
#include "diffid/text_format.hpp"

namespace diffid::pretrain {
namespace {

std::vector<std::size_t> label_indices(std::span<const std::string> labels, std::vector<std::string>& classes) {
  classes.assign(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    out.push_back(static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), l) - classes.begin()));
  }
  return out;
}

std::vector<Image> prepared(const nn::Backbone& backbone, std::span<const Image> images) {
  std::vector<Image> out(images.size());
  parallel_for(images.size(), 0, [&](std::size_t i) { out[i] = backbone.prepare(images[i]); });
  return out;
}

std::vector<std::vector<double>> embed_all(const nn::Backbone& backbone, std::span<const Image> images) {
  std::vector<std::vector<double>> out(images.size());
  parallel_for(images.size(), 0, [&](std::size_t i) { out[i] = backbone.embed(images[i]); });
  return out;
}

}  // namespace

void PretrainConfig::validate() const {
  training.validate();
  if (backbone.input.channels != 3 || backbone.input.height < 2 || backbone.input.width < 2) {
    throw std::invalid_argument("backbone input must be 3 channels and at least 2x2");
  }
  if (backbone.conv_channels == 0 || backbone.embedding_dim == 0) {
    throw std::invalid_argument("backbone widths must be positive");
  }
}

bool PretrainConfig::operator==(const PretrainConfig& o) const { return to_values(*this) == to_values(o); }

std::map<std::string, std::string> to_values(const PretrainConfig& cfg) {
  const auto& t = cfg.training;
  return {
      {"epochs", std::to_string(t.epochs)},
      {"learning_rate", format_real(t.learning_rate)},
      {"weight_decay", format_real(t.weight_decay)},
      {"warmup_epochs", std::to_string(t.warmup_epochs)},
      {"batch_size", std::to_string(t.batch_size)},
      {"seed", std::to_string(t.seed)},
      {"mixup", t.mixup ? "true" : "false"},
      {"cutmix", t.cutmix ? "true" : "false"},
      {"random_erasing", t.random_erasing ? "true" : "false"},
      {"input_height", std::to_string(cfg.backbone.input.height)},
      {"input_width", std::to_string(cfg.backbone.input.width)},
      {"conv_channels", std::to_string(cfg.backbone.conv_channels)},
      {"embedding_dim", std::to_string(cfg.backbone.embedding_dim)},
  };
}

PretrainConfig from_values(const std::map<std::string, std::string>& values, std::vector<std::string>& violations,
                           const std::string& prefix) {
  PretrainConfig cfg;
  auto& t = cfg.training;
  std::map<std::string, std::size_t*> sizes = {
      {"epochs", &t.epochs},
      {"warmup_epochs", &t.warmup_epochs},
      {"batch_size", &t.batch_size},
      {"input_height", &cfg.backbone.input.height},
      {"input_width", &cfg.backbone.input.width},
      {"conv_channels", &cfg.backbone.conv_channels},
      {"embedding_dim", &cfg.backbone.embedding_dim},
  };
  std::map<std::string, double*> reals = {{"learning_rate", &t.learning_rate}, {"weight_decay", &t.weight_decay}};
  std::map<std::string, bool*> flags = {
      {"mixup", &t.mixup}, {"cutmix", &t.cutmix}, {"random_erasing", &t.random_erasing}};
  for (const auto& [key, value] : values) {
    bool ok = true;
    if (auto it = sizes.find(key); it != sizes.end()) {
      ok = parse_number(value, *it->second);
    } else if (auto it = reals.find(key); it != reals.end()) {
      ok = parse_number(value, *it->second);
    } else if (auto it = flags.find(key); it != flags.end()) {
      ok = parse_bool(value, *it->second);
    } else if (key == "seed") {
      ok = parse_number(value, t.seed);
    } else {
      violations.push_back(prefix + key + ": unknown key");
      continue;
    }
    if (!ok) violations.push_back(prefix + key + ": cannot parse '" + value + "'");
  }
  if (t.epochs < 1) violations.push_back(prefix + "epochs: must be >= 1");
  if (t.warmup_epochs >= t.epochs) violations.push_back(prefix + "warmup_epochs: must be smaller than epochs");
  if (!(t.learning_rate > 0.0)) violations.push_back(prefix + "learning_rate: must be positive");
  if (!(t.weight_decay >= 0.0)) violations.push_back(prefix + "weight_decay: must be non-negative");
  if (t.batch_size < 1) violations.push_back(prefix + "batch_size: must be >= 1");
  if (cfg.backbone.input.height < 2) violations.push_back(prefix + "input_height: must be >= 2");
  if (cfg.backbone.input.width < 2) violations.push_back(prefix + "input_width: must be >= 2");
  if (cfg.backbone.conv_channels < 1) violations.push_back(prefix + "conv_channels: must be >= 1");
  if (cfg.backbone.embedding_dim < 1) violations.push_back(prefix + "embedding_dim: must be >= 1");
  return cfg;
}

PretrainResult pretrain(std::span<const Image> images, std::span<const std::string> labels,
                        const PretrainConfig& cfg) {
  cfg.validate();
  if (images.size() != labels.size()) throw std::invalid_argument("one label per image is required");
  PretrainResult result;
  const auto indices = label_indices(labels, result.labels);
  if (result.labels.size() < 2) throw std::invalid_argument("pre-training needs at least two identities");

  auto backbone = nn::Backbone::initialized(cfg.backbone, mix_seed(cfg.training.seed, 0));
  auto head = nn::LinearHead::initialized(cfg.backbone.embedding_dim, result.labels.size(),
                                          mix_seed(cfg.training.seed, 1));
  const auto inputs = prepared(backbone, images);
  auto trained = nn::train_classifier(backbone, head, inputs, indices, cfg.training);
  result.epoch_losses = std::move(trained.epoch_losses);
  result.lr_trace = std::move(trained.lr_trace);
  result.train_accuracy = trained.train_accuracy;

  result.checkpoint = backbone.to_checkpoint();
  for (const auto& [k, v] : to_values(cfg)) result.checkpoint.config["training." + k] = v;
  result.checkpoint.config["classes"] = std::to_string(result.labels.size());
  result.checkpoint.config["final_loss"] = format_real(result.epoch_losses.back());
  result.checkpoint.config["train_accuracy"] = format_real(result.train_accuracy);
  std::string losses;
  for (double l : result.epoch_losses) losses += (losses.empty() ? "" : ",") + format_real(l);
  result.checkpoint.config["epoch_losses"] = losses;
  return result;
}

std::vector<Image> load_images(const dataset::DatasetManifest& manifest, const std::string& base_dir) {
  std::vector<Image> out(manifest.records.size());
  const std::filesystem::path root(base_dir);
  parallel_for(out.size(), 0, [&](std::size_t i) { out[i] = read_pnm((root / manifest.records[i].path).string()); });
  return out;
}

PretrainResult pretrain(const dataset::DatasetManifest& manifest, const std::string& base_dir,
                        const PretrainConfig& cfg) {
  manifest.validate();
  std::vector<std::string> labels;
  for (const auto& r : manifest.records) labels.push_back(r.identity_key());
  if (std::set<std::string>(labels.begin(), labels.end()).size() < 2) {
    throw std::invalid_argument("pre-training needs at least two identities");
  }
  const auto images = load_images(manifest, base_dir);
  return pretrain(images, labels, cfg);
}

std::size_t fs_keep_count(double fraction, std::size_t count) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("subset fraction must be in (0, 1]");
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(count) - 1e-9));
  return std::clamp<std::size_t>(k, 1, count);
}

std::size_t ss_keep_count(double fraction, std::size_t identities) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("subset fraction must be in (0, 1]");
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(identities) + 1e-9));
  return std::clamp<std::size_t>(k, 1, identities);
}

dataset::DatasetManifest subsample(const dataset::DatasetManifest& manifest, const SubsetSpec& spec) {
  if (!(spec.fraction > 0.0 && spec.fraction <= 1.0)) throw std::invalid_argument("subset fraction must be in (0, 1]");
  if (manifest.records.empty()) throw std::invalid_argument("cannot subsample an empty manifest");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) groups[manifest.records[i].identity_key()].push_back(i);

  std::vector<bool> keep(manifest.records.size(), false);
  if (spec.mode == SubsetMode::fs) {
    std::size_t g = 0;
    for (auto& [key, members] : groups) {
      Rng rng(mix_seed(spec.seed, g++));
      rng.shuffle(members.begin(), members.end());
      const auto k = fs_keep_count(spec.fraction, members.size());
      for (std::size_t j = 0; j < k; ++j) keep[members[j]] = true;
    }
  } else {
    std::vector<const std::vector<std::size_t>*> order;
    for (const auto& [key, members] : groups) order.push_back(&members);
    Rng rng(spec.seed);
    rng.shuffle(order.begin(), order.end());
    const auto k = ss_keep_count(spec.fraction, order.size());
    for (std::size_t j = 0; j < k; ++j) {
      for (auto i : *order[j]) keep[i] = true;
    }
  }
  dataset::DatasetManifest out;
  out.crop = manifest.crop;
  out.version = manifest.version;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) out.records.push_back(manifest.records[i]);
  }
  return out;
}

TargetData load_target(const dataset::DatasetManifest& manifest, const std::string& base_dir) {
  manifest.validate();
  std::set<std::string> splits;
  for (const auto& r : manifest.records) splits.insert(r.split);
  std::vector<std::string> missing;
  for (const char* s : {"train", "query", "gallery"}) {
    if (!splits.count(s)) missing.push_back(s);
  }
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw std::invalid_argument("target manifest lacks split tags: " + names);
  }
  const auto images = load_images(manifest, base_dir);
  TargetData t;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& r = manifest.records[i];
    const metrics::RetrievalEntry entry{r.identity_key(), r.camera};
    if (r.split == "train") {
      t.train.push_back(images[i]);
      t.train_labels.push_back(r.identity_key());
    } else if (r.split == "query") {
      t.query.push_back(images[i]);
      t.query_entries.push_back(entry);
    } else if (r.split == "gallery") {
      t.gallery.push_back(images[i]);
      t.gallery_entries.push_back(entry);
    }
  }
  return t;
}

metrics::RetrievalResult evaluate_backbone(const nn::Backbone& backbone, const TargetData& target, bool cross_camera,
                                           std::size_t max_rank) {
  return metrics::evaluate_embeddings(embed_all(backbone, target.query), embed_all(backbone, target.gallery),
                                      target.query_entries, target.gallery_entries, cross_camera, max_rank);
}

FinetuneResult finetune_eval(const std::optional<Checkpoint>& checkpoint, const TargetData& target,
                             const FinetuneConfig& cfg) {
  if (target.train.size() != target.train_labels.size() || target.query.size() != target.query_entries.size() ||
      target.gallery.size() != target.gallery_entries.size()) {
    throw std::invalid_argument("target data lists are misaligned");
  }
  if (target.train.empty() || target.query.empty() || target.gallery.empty()) {
    throw std::invalid_argument("target data needs train, query and gallery images");
  }
  auto backbone = checkpoint ? nn::Backbone::from_checkpoint(*checkpoint)
                             : nn::Backbone::initialized(cfg.backbone, mix_seed(cfg.training.seed, 0));
  FinetuneResult result;
  if (cfg.training.epochs == 0) {
    result.final = evaluate_backbone(backbone, target, cfg.cross_camera, cfg.max_rank);
    return result;
  }
  std::vector<std::string> classes;
  const auto indices = label_indices(target.train_labels, classes);
  auto head = nn::LinearHead::initialized(backbone.config().embedding_dim, classes.size(),
                                          mix_seed(cfg.training.seed, 1));
  const auto inputs = prepared(backbone, target.train);
  nn::train_classifier(backbone, head, inputs, indices, cfg.training, [&](std::size_t) {
    auto r = evaluate_backbone(backbone, target, cfg.cross_camera, cfg.max_rank);
    result.map_trace.push_back(r.map);
    result.per_epoch.push_back(std::move(r));
  });
  result.final = result.per_epoch.back();
  return result;
}

std::string config_hash(const std::map<std::string, std::string>& values) {
  std::string flat;
  for (const auto& [k, v] : values) flat += k + "=" + v + "\n";
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << fnv1a(flat);
  return out.str();
}

void append_run_record(const std::string& path, const RunRecord& record) {
  for (const auto* f : {&record.run_id, &record.config_hash}) {
    if (f->empty() || f->find_first_of("\t\n") != std::string::npos) {
      throw std::invalid_argument("run ledger fields must be non-empty and tab-free");
    }
  }
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot open run ledger " + path);
  out << record.run_id << "\t" << record.config_hash << "\t" << format_real(record.map) << "\t" << format_real(record.rank1) << "\n";
  if (!out) throw IoError("cannot append to run ledger " + path);
}

std::vector<RunRecord> read_run_ledger(const std::string& path) {
  std::istringstream in(binary::read_file(path));
  std::vector<RunRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    RunRecord r;
    std::string map, rank1;
    std::getline(fields, r.run_id, '\t');
    std::getline(fields, r.config_hash, '\t');
    std::getline(fields, map, '\t');
    std::getline(fields, rank1, '\t');
    if (!parse_number(map, r.map) || !parse_number(rank1, r.rank1)) {
      throw IntegrityError("malformed run ledger line: " + line);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace diffid::pretrain
