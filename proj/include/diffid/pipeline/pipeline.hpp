#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "diffid/dataset/manifest.hpp"
#include "diffid/diffusion/backend.hpp"
#include "diffid/filter/filter.hpp"
#include "diffid/pipeline/config.hpp"
#include "diffid/prompt/captioner.hpp"
#include "diffid/prompt/iir.hpp"

namespace diffid::pipeline {

enum class Stage { caption, iir, reference_set, fine_tune, sample, filter };
inline constexpr std::array<Stage, 6> kStages = {Stage::caption,   Stage::iir,    Stage::reference_set,
                                                 Stage::fine_tune, Stage::sample, Stage::filter};
std::string to_string(Stage stage);

enum class StageStatus { ok, cached, failed };
std::string to_string(StageStatus status);

struct StageRecord {
  std::size_t identity_index = 0;
  std::string identity;  // identity key
  Stage stage = Stage::caption;
  StageStatus status = StageStatus::ok;
  double duration_ms = 0.0;
  std::vector<std::string> outputs;
  std::string error;
};

/// Append-only, thread-safe record of stage executions.
class RunLedger {
 public:
  void append(StageRecord record);
  /// Ordered by identity index, then pipeline stage order.
  std::vector<StageRecord> records() const;
  /// Number of stage runs that actually executed (status ok) for `stage`.
  std::size_t executed(Stage stage) const;
  std::vector<std::string> failed_identities() const;
  std::string format() const;

 private:
  mutable std::mutex mutex_;
  std::vector<StageRecord> records_;
};

/// One source identity: its images at generator resolution.
struct IdentityJob {
  std::size_t index = 0;
  std::string source;
  std::string identity;
  std::vector<Image> images;
  std::uint64_t seed = 0;

  std::string key() const { return source + "/" + identity; }
};

struct IdentityOutcome {
  std::vector<StageRecord> records;
  std::optional<filter::FilterReport> report;
  bool succeeded() const;
};

struct PipelineOptions {
  prompt::CaptionerRegistry captioners{};
  /// Extra generation backends by name; "toy" is built from the config
  /// when not supplied here.
  std::map<std::string, std::shared_ptr<diffusion::GenerationBackend>> backends;
};

struct PipelineResult {
  dataset::DatasetManifest manifest;
  dataset::StatsReport stats;
  std::optional<dataset::DistributionCurve> cdf;  // absent for an empty manifest
  std::vector<dataset::Deficiency> deficient;
  std::vector<StageRecord> ledger;
  std::vector<std::string> failed_identities;
  std::optional<pretrain::PretrainResult> pretrained;

  int exit_code() const { return failed_identities.empty() ? 0 : 1; }
};

/// Identities from every source manifest, ordered by identity key; the
/// order defines identity indices and per-identity seeds.
std::vector<IdentityJob> load_identities(const PipelineConfig& cfg);

class Pipeline {
 public:
  Pipeline(PipelineConfig cfg, PipelineOptions options = {});
  ~Pipeline();

  const PipelineConfig& config() const { return cfg_; }
  const std::vector<IdentityJob>& identities() const { return jobs_; }
  prompt::IirRegistry& registry() { return registry_; }
  const RunLedger& ledger() const { return ledger_; }
  diffusion::GenerationBackend& backend() { return *backend_; }

  /// Runs stages first..last for one identity. Stages whose cached output
  /// matches their inputs are skipped; the first failure stops the identity.
  IdentityOutcome run_identity(const IdentityJob& job, Stage first = Stage::caption, Stage last = Stage::filter);

  /// Caption and IIR for all identities in index order, then the remaining
  /// stages in parallel, then assembly, statistics and optional pre-training.
  PipelineResult run();

  /// Directory holding an identity's cached stage outputs.
  std::string identity_dir(const IdentityJob& job) const;

 private:
  struct SourceFilter;
  const SourceFilter& source_filter(const std::string& source);

  PipelineConfig cfg_;
  PipelineOptions options_;
  std::vector<IdentityJob> jobs_;
  std::shared_ptr<diffusion::GenerationBackend> backend_;
  std::shared_ptr<const prompt::Captioner> captioner_;
  std::set<std::string> vocabulary_;
  std::vector<std::string> candidates_;
  prompt::IirRegistry registry_;
  RunLedger ledger_;
  std::mutex filter_mutex_;
  std::map<std::string, std::unique_ptr<SourceFilter>> filters_;
};

PipelineResult run_pipeline(const PipelineConfig& cfg, PipelineOptions options = {});

/// Toy generator settings derived from the config.
diffusion::ToyBackendSettings toy_backend_settings(const PipelineConfig& cfg);

}  // namespace diffid::pipeline
