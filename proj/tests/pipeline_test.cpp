#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <set>
#include <thread>

#include "diffid/binary_io.hpp"
#include "diffid/errors.hpp"
#include "diffid/pipeline/config.hpp"
#include "diffid/pipeline/pipeline.hpp"
#include "diffid/prompt/captioner.hpp"
#include "diffid/toy/world.hpp"
#include "support.hpp"

using namespace diffid;
using namespace diffid::pipeline;

namespace {

// Source sprites plus a small, fast config over them.
std::string toy_config(const std::string& name, std::size_t identities = 3, const std::string& extra = "") {
  const auto dir = test_support::scratch_dir(name);
  toy::SpriteDatasetSpec spec;
  spec.identities = identities;
  spec.frames = 6;
  spec.shape = {3, 32, 16};
  spec.seed = 11;
  toy::write_sprite_dataset(dir + "/src", spec);
  return "[pipeline]\nwork_dir = " + dir + "/work\noutput_dir = " + dir + "/out\nseed = 5\n" +
         "[sources]\nmanifests = " + dir + "/src/manifest.tsv\n" +
         "[generation]\nreference_set_size = 6\nsamples_per_identity = 10\nfine_tune_steps = 40\nsample_steps = 8\n" +
         "[filter]\nepochs = 4\n[dataset]\ncrop_height = 32\ncrop_width = 16\n" + extra;
}

class FlakyCaptioner final : public prompt::Captioner {
 public:
  const std::string& name() const override { return name_; }
  std::string caption(std::span<const Image> images) const override {
    if (++calls_ == 2) throw BackendError(name_, "timed out");
    return inner_.caption(images);
  }

 private:
  std::string name_ = "flaky";
  prompt::StubCaptioner inner_;
  mutable std::atomic<int> calls_{0};
};

}  // namespace

TEST_CASE("empty config yields defaults") {
  const auto cfg = validate_config("");
  CHECK(cfg == PipelineConfig{});
  CHECK(cfg.backend == "toy");
  CHECK(cfg.captioner == "stub");
  CHECK(cfg.lambda == 1.0);
  CHECK(cfg.reference_set_size == 200);
  CHECK(cfg.samples_per_identity == 200);
  CHECK(cfg.filter_kind == filter::FilterKind::reid_ctf);
  CHECK(cfg.crop == dataset::CropSize{256, 128});
}

TEST_CASE("every violation is reported") {
  try {
    validate_config("[generation]\nreference_set_size = 0\n[filter]\ntau = 1.5\n[bogus]\nx = 1\n");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    const auto& v = e.violations();
    CHECK(v.size() == 3);
    auto names = [&](const std::string& key) {
      return std::any_of(v.begin(), v.end(), [&](const auto& s) { return s.find(key) != std::string::npos; });
    };
    CHECK(names("generation.reference_set_size"));
    CHECK(names("filter.tau"));
    CHECK(names("bogus"));
  }
  CHECK_THROWS_AS(validate_config("[sources]\nmanifests = /no/such/manifest.tsv\n"), ValidationError);
  CHECK_THROWS_AS(validate_config("[prompt]\ntemplate = {caption} only\n"), ValidationError);
  CHECK_THROWS_AS(validate_config("not ini"), ValidationError);
  CHECK_THROWS_AS(load_config("/no/such/config.ini"), IoError);
}

TEST_CASE("serialized configs revalidate to the same config") {
  const auto a = validate_config(
      "[filter]\nkind = cctf\ntau = 0.3\ntau.market = 0.7\ncalibrate_keep = 0.8\n"
      "[generation]\nschedule = cosine\nlambda = 0.5\n[dataset]\ncdf_thresholds = 5, 50\n"
      "[pretrain]\nenabled = true\nepochs = 3\nwarmup_epochs = 1\n");
  CHECK(a.tau_for("market") == 0.7);
  CHECK(a.tau_for("other") == 0.3);
  CHECK(a.pretrain.training.epochs == 3);
  CHECK(validate_config(serialize_config(a)) == a);
  CHECK(serialize_config(validate_config(serialize_config(a))) == serialize_config(a));
}

TEST_CASE("environment overrides file values") {
  const auto env = [](const std::string& name) -> std::optional<std::string> {
    if (name == "DIFFID_GENERATION_SAMPLES_PER_IDENTITY") return "42";
    if (name == "DIFFID_FILTER_TAU_MARKET") return "0.9";
    return std::nullopt;
  };
  const auto cfg = validate_config("[generation]\nsamples_per_identity = 7\n[filter]\ntau.market = 0.1\n", env);
  CHECK(cfg.samples_per_identity == 42);
  CHECK(cfg.tau_for("market") == 0.9);
  const auto bad = [](const std::string& name) -> std::optional<std::string> {
    if (name == "DIFFID_FILTER_TAU") return "lots";
    return std::nullopt;
  };
  CHECK_THROWS_AS(validate_config("", bad), ValidationError);
}

TEST_CASE("one identity runs six stages in order and resumes from its cache") {
  const auto cfg = validate_config(toy_config("pipeline_stages", 2));
  Pipeline p(cfg);
  REQUIRE(p.identities().size() == 2);
  const auto& job = p.identities()[0];
  const auto first = p.run_identity(job);
  REQUIRE(first.records.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(first.records[i].stage == kStages[i]);
    CHECK(first.records[i].status == StageStatus::ok);
  }
  CHECK(first.succeeded());
  REQUIRE(first.report.has_value());
  CHECK(first.report->kept.size() + first.report->discarded.size() == 10);

  Pipeline again(cfg);
  const auto cached = again.run_identity(again.identities()[0]);
  for (const auto& r : cached.records) CHECK(r.status == StageStatus::cached);
  for (auto s : kStages) CHECK(again.ledger().executed(s) == 0);

  std::filesystem::remove(again.identity_dir(job) + "/filter.tsv");
  Pipeline resumed(cfg);
  const auto third = resumed.run_identity(resumed.identities()[0]);
  for (auto s : kStages) CHECK(resumed.ledger().executed(s) == (s == Stage::filter ? 1u : 0u));
  CHECK(third.report->kept.size() == first.report->kept.size());
  for (std::size_t i = 0; i < third.report->kept.size(); ++i) {
    CHECK(third.report->kept[i].score == first.report->kept[i].score);
  }

  std::filesystem::remove(resumed.identity_dir(job) + "/model.ckpt");
  Pipeline tuned(cfg);
  tuned.run_identity(tuned.identities()[0]);
  for (auto s : kStages) {
    const bool reran = s == Stage::fine_tune || s == Stage::sample || s == Stage::filter;
    CHECK(tuned.ledger().executed(s) == (reran ? 1u : 0u));
  }
}

TEST_CASE("concurrent identities receive distinct tokens") {
  const auto text = toy_config("pipeline_iir", 2, "[generation]\nfine_tune_steps = 1\n");
  for (int trial = 0; trial < 20; ++trial) {
    auto cfg = validate_config(text);
    cfg.work_dir += std::to_string(trial);
    Pipeline p(cfg);
    std::vector<IdentityOutcome> out(2);
    std::thread a([&] { out[0] = p.run_identity(p.identities()[0], Stage::caption, Stage::iir); });
    std::thread b([&] { out[1] = p.run_identity(p.identities()[1], Stage::caption, Stage::iir); });
    a.join();
    b.join();
    for (const auto& o : out) {
      REQUIRE(o.records.size() == 2);
      for (const auto& r : o.records) CHECK(r.status == StageStatus::ok);
    }
    CHECK(p.registry().used().size() == 2);
  }
}

TEST_CASE("full runs are complete, isolated on failure and reproducible") {
  const auto text = toy_config("pipeline_full", 3);
  const auto cfg = validate_config(text);
  const auto result = run_pipeline(cfg);
  CHECK(result.exit_code() == 0);
  CHECK(dataset::identity_counts(result.manifest).size() == 3);
  CHECK(result.ledger.size() == 18);
  REQUIRE(result.cdf.has_value());
  const auto manifest_path = cfg.output_dir + "/dataset/manifest.tsv";
  const auto bytes = binary::read_file(manifest_path);
  CHECK(dataset::parse_manifest(bytes) == result.manifest);
  result.manifest.validate();

  auto fresh = cfg;
  fresh.work_dir += "-second";
  fresh.output_dir += "-second";
  run_pipeline(fresh);
  CHECK(binary::read_file(fresh.output_dir + "/dataset/manifest.tsv") == bytes);

  auto flaky = validate_config(text + "[captioner]\nname = flaky\n");
  flaky.work_dir += "-flaky";
  flaky.output_dir += "-flaky";
  PipelineOptions opts;
  opts.captioners.add(std::make_shared<FlakyCaptioner>());
  const auto partial = run_pipeline(flaky, std::move(opts));
  CHECK(partial.exit_code() != 0);
  CHECK(dataset::identity_counts(partial.manifest).size() == 2);
  REQUIRE(partial.failed_identities.size() == 1);
  CHECK(partial.failed_identities[0] == "toy/p0001");
  const auto failed = std::find_if(partial.ledger.begin(), partial.ledger.end(),
                                   [](const auto& r) { return r.status == StageStatus::failed; });
  REQUIRE(failed != partial.ledger.end());
  CHECK(failed->stage == Stage::caption);
  CHECK(failed->error.find("timed out") != std::string::npos);
  CHECK(binary::read_file(flaky.output_dir + "/ledger.tsv").find("failed") != std::string::npos);
}
