#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diffid/binary_io.hpp"
#include "diffid/dataset/manifest.hpp"
#include "diffid/errors.hpp"
#include "diffid/filter/filter.hpp"
#include "diffid/ini.hpp"
#include "diffid/metrics/retrieval.hpp"
#include "diffid/pipeline/config.hpp"
#include "diffid/pipeline/pipeline.hpp"
#include "diffid/pretrain/harness.hpp"
#include "diffid/text_format.hpp"
#include "diffid/toy/world.hpp"

namespace fs = std::filesystem;
using namespace diffid;

namespace {

std::string dir_of(const std::string& manifest_path) {
  auto p = fs::path(manifest_path).parent_path();
  return p.empty() ? "." : p.string();
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    binary::write_file_atomic(out_path, text);
  }
}

int cmd_validate(const std::string& path) {
  try {
    std::cout << pipeline::serialize_config(pipeline::load_config(path));
    return 0;
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations()) std::cerr << "invalid: " << v << "\n";
    return 2;
  }
}

int cmd_run(const std::string& path) {
  const auto cfg = pipeline::load_config(path);
  const auto result = pipeline::run_pipeline(cfg);
  std::cout << dataset::format_stats(result.stats);
  for (const auto& id : result.failed_identities) std::cerr << "failed identity: " << id << "\n";
  std::cerr << "manifest: " << (fs::path(cfg.output_dir) / "dataset" / dataset::kManifestFileName).string() << "\n";
  return result.exit_code();
}

filter::LabeledSet labeled_set(const std::string& manifest_path) {
  const auto m = dataset::read_manifest(manifest_path);
  const auto images = pretrain::load_images(m, dir_of(manifest_path));
  filter::LabeledSet set;
  for (std::size_t i = 0; i < images.size(); ++i) {
    set.source = m.records[i].source;
    set.images.push_back({images[i], m.records[i].identity});
  }
  return set;
}

struct FilterArgs {
  std::string manifest;
  std::string kind = "reid_ctf";
  std::optional<double> tau;
  std::optional<double> calibrate;
  std::string source_manifest;
  std::string clip_text = "a photo of a person";
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_filter(const FilterArgs& a) {
  const auto kind = filter::parse_filter_kind(a.kind);
  auto m = dataset::read_manifest(a.manifest);
  const auto images = pretrain::load_images(m, dir_of(a.manifest));
  std::vector<filter::GeneratedSample> samples(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    samples[i].id = m.records[i].path;
    samples[i].image = images[i];
    samples[i].identity = m.records[i].identity;
    samples[i].source = m.records[i].source;
    samples[i].camera = m.records[i].camera;
  }

  filter::FilterModel model;
  std::optional<filter::LabeledSet> source;
  if (kind == filter::FilterKind::clip) {
    model = filter::make_clip_scorer(a.clip_text, std::make_shared<filter::ToyJointEmbedder>());
  } else {
    if (a.source_manifest.empty()) throw std::invalid_argument("--source is required for " + a.kind);
    source = labeled_set(a.source_manifest);
    if (kind == filter::FilterKind::cctf) {
      filter::ClassifierConfig cc;
      cc.seed = a.seed;
      model = filter::train_id_classifier(*source, cc);
    } else {
      filter::ReidConfig rc;
      rc.training.seed = a.seed;
      model = filter::train_reid_embedder(*source, rc).model;
    }
  }

  double tau = a.tau.value_or(0.5);
  if (a.calibrate) {
    std::vector<filter::GeneratedSample> real;
    const auto& held = source ? source->images : std::vector<filter::LabeledImage>{};
    for (std::size_t i = 0; i < held.size(); ++i) {
      filter::GeneratedSample s;
      s.id = "real" + std::to_string(i);
      s.image = held[i].image;
      s.identity = held[i].identity;
      real.push_back(std::move(s));
    }
    if (real.empty()) real = samples;
    std::vector<double> scores;
    for (const auto& s : filter::score_samples(model, real).scored) scores.push_back(s.score);
    tau = filter::calibrate_threshold(scores, *a.calibrate);
  }

  const auto scored = filter::score_samples(model, samples);
  for (const auto& e : scored.errors) std::cerr << "unscored " << e.sample_id << ": " << e.message << "\n";
  const auto report = filter::apply_threshold(scored, tau);

  dataset::DatasetManifest out;
  out.crop = m.crop;
  std::map<std::string, double> kept;
  for (const auto& s : report.kept) kept[s.sample.id] = s.score;
  for (auto r : m.records) {
    auto it = kept.find(r.path);
    if (it == kept.end()) continue;
    r.filter_kind = filter::to_string(kind);
    r.score = it->second;
    out.records.push_back(std::move(r));
  }
  emit(dataset::format_manifest(out), a.out);
  std::cerr << "tau " << format_real(tau) << " kept " << report.kept.size() << " discarded "
            << report.discarded.size() << "\n";
  return scored.errors.empty() ? 0 : 1;
}

pretrain::PretrainConfig read_pretrain_config(const std::string& path) {
  pretrain::PretrainConfig cfg;
  if (path.empty()) return cfg;
  const auto doc = parse_ini(binary::read_file(path));
  std::map<std::string, std::string> values;
  for (const char* section : {"", "pretrain"}) {
    if (auto it = doc.find(section); it != doc.end()) values.insert(it->second.begin(), it->second.end());
  }
  values.erase("enabled");
  std::vector<std::string> violations;
  cfg = pretrain::from_values(values, violations);
  if (!violations.empty()) throw ValidationError(violations);
  return cfg;
}

int cmd_pretrain(const std::string& manifest_path, const std::string& config_path, const std::string& out) {
  const auto cfg = read_pretrain_config(config_path);
  const auto m = dataset::read_manifest(manifest_path);
  const auto result = pretrain::pretrain(m, dir_of(manifest_path), cfg);
  save_checkpoint(out, result.checkpoint);
  for (std::size_t e = 0; e < result.epoch_losses.size(); ++e) {
    std::cout << "epoch\t" << e + 1 << "\tloss\t" << format_real(result.epoch_losses[e]) << "\tlr\t"
              << format_real(result.lr_trace[e]) << "\n";
  }
  std::cout << "train_accuracy\t" << format_real(result.train_accuracy) << "\n";
  std::cerr << "checkpoint: " << out << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string target;
  std::size_t epochs = 5;
  std::size_t warmup = 1;
  double learning_rate = pretrain::FinetuneConfig{}.training.learning_rate;
  std::uint64_t seed = 0;
  bool same_camera = false;
  std::string ledger;
  std::string run_id;
};

int cmd_eval(const EvalArgs& a) {
  std::optional<Checkpoint> ckpt;
  if (a.checkpoint != "none") ckpt = load_checkpoint(a.checkpoint);
  pretrain::FinetuneConfig cfg;
  cfg.training.epochs = a.epochs;
  cfg.training.warmup_epochs = a.epochs == 0 ? 0 : std::min(a.warmup, a.epochs - 1);
  cfg.training.learning_rate = a.learning_rate;
  cfg.training.seed = a.seed;
  cfg.cross_camera = !a.same_camera;
  const auto target = pretrain::load_target(dataset::read_manifest(a.target), dir_of(a.target));
  const auto result = pretrain::finetune_eval(ckpt, target, cfg);
  for (std::size_t e = 0; e < result.map_trace.size(); ++e) {
    std::cout << "epoch\t" << e + 1 << "\tmap\t" << format_real(result.map_trace[e]) << "\n";
  }
  std::cout << metrics::format_report(result.final);
  if (!a.ledger.empty()) {
    std::map<std::string, std::string> values = {{"checkpoint", a.checkpoint},
                                                 {"target", a.target},
                                                 {"epochs", std::to_string(a.epochs)},
                                                 {"warmup", std::to_string(cfg.training.warmup_epochs)},
                                                 {"learning_rate", format_real(a.learning_rate)},
                                                 {"seed", std::to_string(a.seed)},
                                                 {"cross_camera", cfg.cross_camera ? "true" : "false"}};
    const auto hash = pretrain::config_hash(values);
    pretrain::append_run_record(a.ledger, {a.run_id.empty() ? "run-" + hash : a.run_id, hash, result.final.map,
                                           result.final.rank(1)});
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Identity-preserving synthetic person dataset toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  auto* validate = app.add_subcommand("validate", "Check a pipeline config and print it fully defaulted");
  validate->add_option("config", config_path)->required();

  auto* run = app.add_subcommand("run", "Run the generation pipeline");
  run->add_option("config", config_path)->required();

  std::string manifest_path;
  dataset::StatsOptions stats_options;
  auto* stats = app.add_subcommand("stats", "Summary statistics of a manifest");
  stats->add_option("manifest", manifest_path)->required();
  stats->add_option("--range-lo", stats_options.range_lo);
  stats->add_option("--range-hi", stats_options.range_hi);
  stats->add_option("--above", stats_options.above);

  std::vector<double> thresholds;
  auto* cdf = app.add_subcommand("cdf", "Identity-size distribution curve");
  cdf->add_option("manifest", manifest_path)->required();
  cdf->add_option("--thresholds", thresholds, "X values (images per identity)")->required()->delimiter(',');

  FilterArgs filter_args;
  auto* filt = app.add_subcommand("filter", "Score and threshold the images of a manifest");
  filt->add_option("manifest", filter_args.manifest)->required();
  filt->add_option("--kind", filter_args.kind)->check(CLI::IsMember({"clip", "cctf", "reid_ctf"}));
  auto* tau_opt = filt->add_option("--tau", filter_args.tau)->check(CLI::Range(0.0, 1.0));
  auto* cal_opt = filt->add_option("--calibrate", filter_args.calibrate, "target keep fraction on source images");
  tau_opt->excludes(cal_opt);
  filt->add_option("--source", filter_args.source_manifest, "labeled source manifest the filter is trained on");
  filt->add_option("--clip-text", filter_args.clip_text);
  filt->add_option("--seed", filter_args.seed);
  filt->add_option("--out", filter_args.out, "output manifest (default stdout)");

  std::string pretrain_config, checkpoint_out = "backbone.ckpt";
  auto* pre = app.add_subcommand("pretrain", "Pre-train the toy backbone on a manifest");
  pre->add_option("manifest", manifest_path)->required();
  pre->add_option("--config", pretrain_config);
  pre->add_option("--out", checkpoint_out);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Fine-tune from a checkpoint (or 'none') and report retrieval metrics");
  eval->add_option("checkpoint", eval_args.checkpoint)->required();
  eval->add_option("target", eval_args.target)->required();
  eval->add_option("--epochs", eval_args.epochs);
  eval->add_option("--warmup", eval_args.warmup);
  eval->add_option("--lr", eval_args.learning_rate, "peak fine-tune learning rate");
  eval->add_option("--seed", eval_args.seed);
  eval->add_flag("--same-camera", eval_args.same_camera, "keep same-camera matches in the gallery");
  eval->add_option("--ledger", eval_args.ledger, "run ledger to append to");
  eval->add_option("--run-id", eval_args.run_id);

  std::string synth_dir;
  toy::SpriteDatasetSpec spec;
  auto* synth = app.add_subcommand("synth", "Render a toy sprite dataset with a manifest");
  synth->add_option("dir", synth_dir)->required();
  synth->add_option("--source", spec.source);
  synth->add_option("--identities", spec.identities);
  synth->add_option("--frames", spec.frames);
  synth->add_option("--height", spec.shape.height);
  synth->add_option("--width", spec.shape.width);
  synth->add_option("--seed", spec.seed);
  synth->add_option("--cameras", spec.cameras);
  synth->add_flag("--eval-splits", spec.eval_splits);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(config_path);
    if (*run) return cmd_run(config_path);
    if (*stats) {
      std::cout << dataset::format_stats(dataset::stats_report(dataset::read_manifest(manifest_path), stats_options));
      return 0;
    }
    if (*cdf) {
      std::cout << dataset::format_curve(dataset::compute_identity_cdf(dataset::read_manifest(manifest_path), thresholds));
      return 0;
    }
    if (*filt) return cmd_filter(filter_args);
    if (*pre) return cmd_pretrain(manifest_path, pretrain_config, checkpoint_out);
    if (*eval) return cmd_eval(eval_args);
    if (*synth) {
      const auto m = toy::write_sprite_dataset(synth_dir, spec);
      std::cerr << m.records.size() << " images written to " << synth_dir << "\n";
      return 0;
    }
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations()) std::cerr << "invalid: " << v << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
