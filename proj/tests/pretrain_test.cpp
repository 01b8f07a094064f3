#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "diffid/checkpoint.hpp"
#include "diffid/pretrain/harness.hpp"
#include "diffid/random.hpp"
#include "diffid/text_format.hpp"
#include "diffid/toy/sprites.hpp"
#include "diffid/toy/world.hpp"
#include "support.hpp"

using namespace diffid;
using namespace diffid::pretrain;

namespace {

struct Toy {
  std::vector<Image> images;
  std::vector<std::string> labels;
};

Toy two_identities(std::uint64_t seed, std::size_t frames = 12) {
  Toy t;
  const auto a = toy::random_identity(seed * 2), b = toy::random_identity(seed * 2 + 1);
  for (std::size_t f = 0; f < frames; ++f) {
    t.images.push_back(toy::render_sprite(a, {3, 32, 16}, f));
    t.labels.push_back("a");
    t.images.push_back(toy::render_sprite(b, {3, 32, 16}, 100 + f));
    t.labels.push_back("b");
  }
  return t;
}

PretrainConfig small(std::size_t epochs, std::size_t warmup, std::uint64_t seed) {
  PretrainConfig cfg;
  cfg.training.epochs = epochs;
  cfg.training.warmup_epochs = warmup;
  cfg.training.batch_size = 8;
  cfg.training.seed = seed;
  return cfg;
}

dataset::DatasetManifest grouped(const std::vector<std::size_t>& counts) {
  dataset::DatasetManifest m;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    for (std::size_t k = 0; k < counts[i]; ++k) {
      dataset::ManifestRecord r;
      r.identity = "p" + std::to_string(i);
      r.source = "s";
      r.path = "s/" + r.identity + "/" + std::to_string(k);
      m.records.push_back(r);
    }
  }
  m.sort();
  return m;
}

std::string target_dir() {
  static const std::string dir = [] {
    const auto d = test_support::scratch_dir("pretrain_target");
    toy::SpriteDatasetSpec spec;
    spec.identities = 6;
    spec.frames = 5;
    spec.shape = {3, 32, 16};
    spec.seed = 4;
    spec.eval_splits = true;
    toy::write_sprite_dataset(d, spec);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("single epoch bookkeeping") {
  const auto t = two_identities(1, 4);
  const auto r = pretrain::pretrain(t.images, t.labels, small(1, 0, 3));
  CHECK(r.epoch_losses.size() == 1);
  CHECK(r.lr_trace == std::vector<double>{4e-3});
  CHECK(r.checkpoint.kind == "reid_backbone");
  CHECK(r.checkpoint.require("training.epochs") == "1");
  CHECK(r.labels == std::vector<std::string>{"a", "b"});
  CHECK(std::isfinite(r.epoch_losses[0]));
  double final_loss = 0.0;
  CHECK(parse_number(r.checkpoint.require("final_loss"), final_loss));
  CHECK(final_loss == r.epoch_losses[0]);
}

TEST_CASE("pretraining is deterministic and rejects bad input") {
  const auto t = two_identities(2, 4);
  const auto a = pretrain::pretrain(t.images, t.labels, small(3, 1, 9));
  const auto b = pretrain::pretrain(t.images, t.labels, small(3, 1, 9));
  CHECK(a.epoch_losses == b.epoch_losses);
  CHECK(a.checkpoint == b.checkpoint);
  CHECK(pretrain::pretrain(t.images, t.labels, small(3, 1, 10)).epoch_losses != a.epoch_losses);

  const std::vector<std::string> one(t.images.size(), "a");
  CHECK_THROWS_AS(pretrain::pretrain(t.images, one, small(3, 1, 9)), std::invalid_argument);
  CHECK_THROWS_AS(pretrain::pretrain(t.images, t.labels, small(3, 3, 9)), std::invalid_argument);
}

TEST_CASE("separable identities are learned") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto t = two_identities(10 + seed);
    CHECK(pretrain::pretrain(t.images, t.labels, small(10, 2, seed)).train_accuracy > 0.9);
  }
}

TEST_CASE("learning rate trace follows warm-up then cosine") {
  for (std::size_t e_total : {2, 5, 10, 30}) {
    for (std::size_t w = 0; w < e_total; w += 3) {
      nn::TrainingConfig cfg;
      cfg.epochs = e_total;
      cfg.warmup_epochs = w;
      cfg.learning_rate = 4e-3;
      for (std::size_t e = 0; e < e_total; ++e) {
        const double expected =
            e < w ? 4e-3 * static_cast<double>(e + 1) / static_cast<double>(w)
                  : 4e-3 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(e - w) / static_cast<double>(e_total - w))) / 2.0;
        CHECK(std::abs(nn::learning_rate_at(cfg, e) - expected) < 1e-9);
      }
    }
  }
  const auto t = two_identities(3, 3);
  const auto r = pretrain::pretrain(t.images, t.labels, small(6, 2, 1));
  REQUIRE(r.lr_trace.size() == 6);
  for (std::size_t e = 0; e < 6; ++e) CHECK(r.lr_trace[e] == nn::learning_rate_at(small(6, 2, 1).training, e));
  CHECK(r.lr_trace[0] == doctest::Approx(2e-3));
  CHECK(r.lr_trace[1] == doctest::Approx(4e-3));
}

TEST_CASE("config values round-trip and report every violation") {
  auto cfg = small(7, 2, 5);
  cfg.training.mixup = true;
  cfg.backbone.embedding_dim = 16;
  std::vector<std::string> v;
  CHECK(from_values(to_values(cfg), v) == cfg);
  CHECK(v.empty());
  from_values({{"epochs", "x"}, {"colour", "red"}, {"batch_size", "-1"}}, v, "pretrain.");
  CHECK(v.size() == 3);
  CHECK(v[0].rfind("pretrain.", 0) == 0);
}

TEST_CASE("subsample counts") {
  CHECK(fs_keep_count(0.1, 20) == 2);
  CHECK(ss_keep_count(0.1, 1501) == 150);
  CHECK(fs_keep_count(0.01, 3) == 1);
  CHECK(ss_keep_count(0.01, 3) == 1);
  CHECK(fs_keep_count(0.3, 10) == 3);
  CHECK(ss_keep_count(0.7, 10) == 7);

  const auto m = grouped({20, 5, 1, 9});
  for (auto mode : {SubsetMode::fs, SubsetMode::ss}) {
    CHECK(subsample(m, {mode, 1.0, 3}) == m);
    CHECK_THROWS_AS(subsample(m, {mode, 0.0, 3}), std::invalid_argument);
    CHECK_THROWS_AS(subsample(m, {mode, -0.5, 3}), std::invalid_argument);
    CHECK_THROWS_AS(subsample(m, {mode, 1.5, 3}), std::invalid_argument);
    CHECK_THROWS_AS(subsample(dataset::DatasetManifest{}, {mode, 0.5, 3}), std::invalid_argument);
  }
  const auto fs = dataset::identity_counts(subsample(m, {SubsetMode::fs, 0.1, 3}));
  CHECK(fs == std::map<std::string, std::size_t>{{"s/p0", 2}, {"s/p1", 1}, {"s/p2", 1}, {"s/p3", 1}});
}

TEST_CASE("subsample properties") {
  Rng rng(31);
  for (int t = 0; t < 100; ++t) {
    std::vector<std::size_t> counts(1 + rng.index(30));
    for (auto& c : counts) c = 1 + rng.index(40);
    const auto m = grouped(counts);
    const auto before = dataset::identity_counts(m);
    const int pct = 1 + static_cast<int>(rng.index(100));
    const SubsetSpec fs_spec{SubsetMode::fs, pct / 100.0, static_cast<std::uint64_t>(t)};
    const SubsetSpec ss_spec{SubsetMode::ss, pct / 100.0, static_cast<std::uint64_t>(t)};

    const auto fs = subsample(m, fs_spec);
    const auto fs_counts = dataset::identity_counts(fs);
    CHECK(fs_counts.size() == before.size());
    for (const auto& [k, n] : before) {
      CHECK(fs_counts.at(k) == std::max<std::size_t>(1, (pct * n + 99) / 100));
    }
    CHECK(fs == subsample(m, fs_spec));

    const auto ss = subsample(m, ss_spec);
    const auto ss_counts = dataset::identity_counts(ss);
    CHECK(ss_counts.size() == std::max<std::size_t>(1, pct * before.size() / 100));
    for (const auto& [k, n] : ss_counts) CHECK(n == before.at(k));

    // Record order is preserved: kept records form a subsequence.
    std::size_t j = 0;
    for (const auto& r : m.records) {
      if (j < ss.records.size() && ss.records[j] == r) ++j;
    }
    CHECK(j == ss.records.size());
  }
}

TEST_CASE("target splits and zero-epoch evaluation") {
  const auto dir = target_dir();
  const auto manifest = dataset::read_manifest(dir + "/manifest.tsv");
  const auto target = load_target(manifest, dir);
  CHECK(target.train.size() == 15);
  CHECK(target.query.size() == 3);
  CHECK(target.gallery.size() == 12);

  auto no_query = manifest;
  std::erase_if(no_query.records, [](const auto& r) { return r.split == "query"; });
  CHECK_THROWS_AS(load_target(no_query, dir), std::invalid_argument);

  const auto t = two_identities(4, 4);
  const auto pre = pretrain::pretrain(t.images, t.labels, small(2, 1, 2));
  FinetuneConfig cfg;
  cfg.training.epochs = 0;
  cfg.training.warmup_epochs = 0;
  const auto r = finetune_eval(pre.checkpoint, target, cfg);
  const auto direct = evaluate_backbone(nn::Backbone::from_checkpoint(pre.checkpoint), target, true, cfg.max_rank);
  CHECK(r.map_trace.empty());
  CHECK(r.final.map == direct.map);
  CHECK(r.final.cmc == direct.cmc);
}

TEST_CASE("fine-tune traces are deterministic and checkpoints round-trip bitwise") {
  const auto target = load_target(dataset::read_manifest(target_dir() + "/manifest.tsv"), target_dir());
  const auto t = two_identities(5, 4);
  const auto pre = pretrain::pretrain(t.images, t.labels, small(2, 1, 2));
  FinetuneConfig cfg;
  cfg.training.epochs = 2;
  cfg.training.batch_size = 8;
  const auto a = finetune_eval(pre.checkpoint, target, cfg);
  CHECK(a.map_trace.size() == 2);
  CHECK(a.per_epoch.size() == 2);
  CHECK(a.map_trace == finetune_eval(pre.checkpoint, target, cfg).map_trace);
  CHECK(finetune_eval(std::nullopt, target, cfg).map_trace.size() == 2);

  const auto path = test_support::scratch_dir("pretrain_ckpt") + "/backbone.ckpt";
  save_checkpoint(path, pre.checkpoint);
  const auto loaded = load_checkpoint(path);
  CHECK(loaded == pre.checkpoint);
  const auto e1 = evaluate_backbone(nn::Backbone::from_checkpoint(loaded), target, true, 10);
  const auto e2 = evaluate_backbone(nn::Backbone::from_checkpoint(pre.checkpoint), target, true, 10);
  CHECK(e1.map == e2.map);
  CHECK(e1.cmc == e2.cmc);
}

TEST_CASE("run ledger appends records") {
  const auto path = test_support::scratch_dir("ledger") + "/runs.tsv";
  const auto h = config_hash({{"epochs", "5"}});
  CHECK(h == config_hash({{"epochs", "5"}}));
  CHECK(h != config_hash({{"epochs", "6"}}));
  append_run_record(path, {"r1", h, 0.5, 0.75});
  append_run_record(path, {"r2", h, 0.25, 1.0});
  const auto runs = read_run_ledger(path);
  REQUIRE(runs.size() == 2);
  CHECK(runs[1].run_id == "r2");
  CHECK(runs[0].map == 0.5);
  CHECK(runs[1].rank1 == 1.0);
}
