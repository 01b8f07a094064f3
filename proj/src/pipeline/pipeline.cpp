#include "diffid/pipeline/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "diffid/binary_io.hpp"
#include "diffid/errors.hpp"
#include "diffid/parallel.hpp"
#include "diffid/prompt/prompts.hpp"
#include "diffid/random.hpp"
#include "diffid/text_format.hpp"

namespace diffid::pipeline {

namespace fs = std::filesystem;

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::caption: return "caption";
    case Stage::iir: return "iir";
    case Stage::reference_set: return "reference_set";
    case Stage::fine_tune: return "fine_tune";
    case Stage::sample: return "sample";
    case Stage::filter: return "filter";
  }
  return "unknown";
}

std::string to_string(StageStatus status) {
  switch (status) {
    case StageStatus::ok: return "ok";
    case StageStatus::cached: return "cached";
    case StageStatus::failed: return "failed";
  }
  return "unknown";
}

void RunLedger::append(StageRecord record) {
  std::lock_guard lock(mutex_);
  records_.push_back(std::move(record));
}

std::vector<StageRecord> RunLedger::records() const {
  std::lock_guard lock(mutex_);
  auto out = records_;
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.identity_index != b.identity_index) return a.identity_index < b.identity_index;
    return static_cast<int>(a.stage) < static_cast<int>(b.stage);
  });
  return out;
}

std::size_t RunLedger::executed(Stage stage) const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [&](const auto& r) {
    return r.stage == stage && r.status == StageStatus::ok;
  }));
}

std::vector<std::string> RunLedger::failed_identities() const {
  std::vector<std::string> out;
  for (const auto& r : records()) {
    if (r.status == StageStatus::failed) out.push_back(r.identity);
  }
  return out;
}

std::string RunLedger::format() const {
  std::ostringstream out;
  out << "index\tidentity\tstage\tstatus\tduration_ms\toutputs\terror\n";
  for (const auto& r : records()) {
    std::string outputs;
    for (const auto& o : r.outputs) outputs += (outputs.empty() ? "" : ";") + o;
    std::string error = r.error;
    std::replace_if(error.begin(), error.end(), [](char c) { return c == '\t' || c == '\n'; }, ' ');
    out << r.identity_index << "\t" << r.identity << "\t" << to_string(r.stage) << "\t" << to_string(r.status) << "\t"
        << format_real(r.duration_ms) << "\t" << (outputs.empty() ? "-" : outputs) << "\t"
        << (error.empty() ? "-" : error) << "\n";
  }
  return out.str();
}

bool IdentityOutcome::succeeded() const {
  return report.has_value() &&
         std::none_of(records.begin(), records.end(), [](const auto& r) { return r.status == StageStatus::failed; });
}

namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << v;
  return out.str();
}

std::string chain_key(const std::string& previous, const std::string& params) {
  return hex(fnv1a(previous + "|" + params));
}

std::uint64_t stage_seed(std::uint64_t identity_seed, Stage stage) {
  return mix_seed(identity_seed, static_cast<std::uint64_t>(stage) + 1);
}

std::string read_trimmed(const fs::path& p) {
  auto s = binary::read_file(p.string());
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

// --- stage file formats ---

std::string encode_bundle(const prompt::PromptBundle& b) {
  return "caption\t" + b.caption + "\niir\t" + b.iir_token + "\nenhanced\t" + b.enhanced_prompt + "\nlpe\t" +
         b.lpe_prompt + "\n";
}

prompt::PromptBundle decode_bundle(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto tab = line.find('\t');
    if (tab != std::string::npos) kv[line.substr(0, tab)] = line.substr(tab + 1);
  }
  prompt::PromptBundle b{kv["caption"], kv["iir"], kv["enhanced"], kv["lpe"]};
  if (!prompt::bundle_is_valid(b)) throw IntegrityError("cached prompt bundle is invalid");
  return b;
}

constexpr std::string_view kSamplesMagic = "DIFFIDSM";

std::string encode_samples(const std::vector<filter::GeneratedSample>& samples) {
  std::string out(kSamplesMagic);
  binary::put_u64(out, samples.size());
  for (const auto& s : samples) {
    binary::put_string(out, s.id);
    binary::put_u64(out, s.seed);
    std::string img;
    encode_image(img, s.image);
    binary::put_string(out, img);
  }
  binary::put_u32(out, binary::crc32(out));
  return out;
}

std::vector<filter::GeneratedSample> decode_samples(std::string_view bytes, const IdentityJob& job,
                                                    const std::string& prompt) {
  if (bytes.size() < kSamplesMagic.size() + 4 || bytes.substr(0, kSamplesMagic.size()) != kSamplesMagic) {
    throw IntegrityError("not a sample file");
  }
  const auto body = bytes.substr(0, bytes.size() - 4);
  binary::Reader tail(bytes.substr(bytes.size() - 4));
  if (tail.u32() != binary::crc32(body)) throw IntegrityError("sample file checksum mismatch");
  binary::Reader in(body.substr(kSamplesMagic.size()));
  std::vector<filter::GeneratedSample> out(in.u64());
  for (auto& s : out) {
    s.id = in.string();
    s.seed = in.u64();
    s.image = decode_image(in.string());
    s.identity = job.identity;
    s.source = job.source;
    s.prompt = prompt;
  }
  return out;
}

struct FilterFile {
  std::string kind;
  double tau = 0.0;
  std::vector<std::pair<std::string, double>> scores;
};

std::string encode_filter(const filter::FilterReport& report) {
  std::vector<const filter::ScoredSample*> all;
  for (const auto& s : report.kept) all.push_back(&s);
  for (const auto& s : report.discarded) all.push_back(&s);
  std::sort(all.begin(), all.end(), [](auto* a, auto* b) { return a->sample.id < b->sample.id; });
  std::string out = "kind\t" + filter::to_string(report.kind) + "\ntau\t" + format_real(report.threshold) + "\n";
  for (const auto* s : all) out += s->sample.id + "\t" + format_real(s->score) + "\n";
  return out;
}

FilterFile decode_filter(const std::string& text) {
  FilterFile f;
  std::istringstream in(text);
  std::string line;
  bool have_tau = false;
  while (std::getline(in, line)) {
    auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    const auto key = line.substr(0, tab), value = line.substr(tab + 1);
    if (key == "kind") {
      f.kind = value;
    } else if (key == "tau") {
      have_tau = parse_number(value, f.tau);
    } else {
      double score = 0.0;
      if (!parse_number(value, score)) throw IntegrityError("bad score in filter output: " + line);
      f.scores.emplace_back(key, score);
    }
  }
  if (f.kind.empty() || !have_tau) throw IntegrityError("filter output lacks kind or tau");
  return f;
}

}  // namespace

diffusion::ToyBackendSettings toy_backend_settings(const PipelineConfig& cfg) {
  diffusion::ToyBackendSettings s;
  s.model.shape = {3, cfg.image_height, cfg.image_width};
  s.model.condition_dim = cfg.condition_dim;
  s.model.time_buckets = cfg.time_buckets;
  s.model.timesteps = cfg.timesteps;
  s.base_seed = cfg.base_seed;
  s.schedule = cfg.schedule;
  s.fine_tune.steps = cfg.fine_tune_steps;
  s.fine_tune.learning_rate = cfg.learning_rate;
  s.fine_tune.batch_size = cfg.batch_size;
  s.loss.lambda = cfg.lambda;
  s.sample_steps = cfg.sample_steps;
  return s;
}

std::vector<IdentityJob> load_identities(const PipelineConfig& cfg) {
  std::map<std::string, IdentityJob> by_key;
  for (const auto& path : cfg.source_manifests) {
    const auto manifest = dataset::read_manifest(path);
    const auto base = fs::path(path).parent_path();
    for (const auto& r : manifest.records) {
      auto& job = by_key[r.identity_key()];
      job.source = r.source;
      job.identity = r.identity;
      job.images.push_back(resize(read_pnm((base / r.path).string()), cfg.image_height, cfg.image_width));
    }
  }
  std::vector<IdentityJob> jobs;
  for (auto& [key, job] : by_key) {
    if (cfg.max_identities != 0 && jobs.size() == cfg.max_identities) break;
    job.index = jobs.size();
    job.seed = mix_seed(cfg.seed, job.index);
    jobs.push_back(std::move(job));
  }
  return jobs;
}

struct Pipeline::SourceFilter {
  filter::FilterModel model;
  double tau = 0.0;
};

Pipeline::Pipeline(PipelineConfig cfg, PipelineOptions options) : cfg_(std::move(cfg)), options_(std::move(options)) {
  jobs_ = load_identities(cfg_);
  if (auto it = options_.backends.find(cfg_.backend); it != options_.backends.end()) {
    backend_ = it->second;
  } else if (cfg_.backend == "toy") {
    backend_ = std::make_shared<diffusion::ToyBackend>(toy_backend_settings(cfg_));
  } else {
    throw BackendError(cfg_.backend, "no generation backend registered under this name");
  }
  captioner_ = options_.captioners.get(cfg_.captioner);
  vocabulary_ = prompt::default_vocabulary();
  if (!cfg_.vocabulary_path.empty()) {
    for (auto& t : prompt::parse_token_list(binary::read_file(cfg_.vocabulary_path))) vocabulary_.insert(t);
  }
  candidates_ = cfg_.iir_candidates_path.empty() ? prompt::default_iir_candidates()
                                                 : prompt::parse_token_list(binary::read_file(cfg_.iir_candidates_path));
}

Pipeline::~Pipeline() = default;

std::string Pipeline::identity_dir(const IdentityJob& job) const {
  return (fs::path(cfg_.work_dir) / "identities" / job.source / job.identity).string();
}

const Pipeline::SourceFilter& Pipeline::source_filter(const std::string& source) {
  std::lock_guard lock(filter_mutex_);
  if (auto it = filters_.find(source); it != filters_.end()) return *it->second;

  filter::LabeledSet train{source, {}};
  std::vector<filter::GeneratedSample> held_out;
  for (const auto& job : jobs_) {
    if (job.source != source) continue;
    for (std::size_t i = 0; i < job.images.size(); ++i) {
      const bool hold = cfg_.calibrate_keep && cfg_.filter_kind != filter::FilterKind::clip &&
                        job.images.size() >= 2 && i % 4 == 3;
      if (hold) {
        filter::GeneratedSample s;
        s.id = job.identity + "-real" + std::to_string(i);
        s.image = job.images[i];
        s.identity = job.identity;
        s.source = source;
        held_out.push_back(std::move(s));
      } else {
        train.images.push_back({job.images[i], job.identity});
      }
    }
  }
  if (train.images.empty()) throw std::invalid_argument("no source images for " + source);

  auto f = std::make_unique<SourceFilter>();
  const std::uint64_t seed = mix_seed(cfg_.seed, fnv1a("filter/" + source));
  switch (cfg_.filter_kind) {
    case filter::FilterKind::clip:
      f->model = filter::make_clip_scorer(cfg_.clip_text, std::make_shared<filter::ToyJointEmbedder>());
      for (const auto& li : train.images) {
        filter::GeneratedSample s;
        s.image = li.image;
        s.identity = li.identity;
        s.source = source;
        held_out.push_back(std::move(s));
      }
      break;
    case filter::FilterKind::cctf: {
      filter::ClassifierConfig cc;
      cc.seed = seed;
      f->model = filter::train_id_classifier(train, cc);
      break;
    }
    case filter::FilterKind::reid_ctf: {
      filter::ReidConfig rc;
      rc.training.epochs = cfg_.filter_epochs;
      rc.training.warmup_epochs = std::min<std::size_t>(rc.training.warmup_epochs, cfg_.filter_epochs - 1);
      rc.training.seed = seed;
      f->model = filter::train_reid_embedder(train, rc).model;
      break;
    }
  }
  f->tau = cfg_.tau_for(source);
  if (cfg_.calibrate_keep && !held_out.empty()) {
    const auto scored = filter::score_samples(f->model, held_out);
    std::vector<double> scores;
    for (const auto& s : scored.scored) scores.push_back(s.score);
    if (!scores.empty()) f->tau = filter::calibrate_threshold(scores, *cfg_.calibrate_keep);
  }
  return *filters_.emplace(source, std::move(f)).first->second;
}

IdentityOutcome Pipeline::run_identity(const IdentityJob& job, Stage first, Stage last) {
  IdentityOutcome outcome;
  const fs::path dir = identity_dir(job);
  const diversity::ReferenceSetStore store((fs::path(cfg_.work_dir) / "reference_sets").string());

  // In-memory stage products, loaded from the cache on demand.
  std::optional<std::string> caption;
  std::optional<prompt::PromptBundle> bundle;
  std::optional<diversity::ReferenceSet> reference;
  std::optional<std::string> handle;
  std::optional<std::vector<filter::GeneratedSample>> samples;

  auto get_caption = [&]() -> const std::string& {
    if (!caption) caption = read_trimmed(dir / "caption.txt");
    return *caption;
  };
  auto get_bundle = [&]() -> const prompt::PromptBundle& {
    if (!bundle) bundle = decode_bundle(binary::read_file((dir / "prompts.txt").string()));
    return *bundle;
  };
  auto get_reference = [&]() -> const diversity::ReferenceSet& {
    if (!reference) reference = store.load(read_trimmed(dir / "reference.txt"));
    return *reference;
  };
  auto get_handle = [&]() -> const std::string& {
    if (!handle) handle = backend_->import_handle((dir / "model.ckpt").string());
    return *handle;
  };
  auto get_samples = [&]() -> const std::vector<filter::GeneratedSample>& {
    if (!samples) samples = decode_samples(binary::read_file((dir / "samples.bin").string()), job, get_bundle().enhanced_prompt);
    return *samples;
  };

  auto digest = [](const std::vector<Image>& images) {
    std::string out;
    for (const auto& img : images) {
      std::string bytes;
      encode_image(bytes, img);
      out += hex(binary::crc32(bytes));
    }
    return hex(fnv1a(out));
  };
  const std::string image_digest = digest(job.images);
  // The filter is trained on every identity of the source.
  auto source_digest = [&] {
    std::string out;
    for (const auto& other : jobs_) {
      if (other.source == job.source) out += other.identity + ":" + digest(other.images);
    }
    return hex(fnv1a(out));
  };

  // Input fingerprint of each stage, chained so an upstream change
  // invalidates everything after it.
  auto params = [&](Stage s) -> std::string {
    switch (s) {
      case Stage::caption: return image_digest + "|" + cfg_.captioner;
      case Stage::iir:
        return std::to_string(job.seed) + "|" + cfg_.prompt_template + "|" + cfg_.iir_candidates_path + "|" +
               cfg_.vocabulary_path;
      case Stage::reference_set:
        return backend_->id() + "|" + std::to_string(cfg_.reference_set_size) + "|" +
               std::to_string(cfg_.image_height) + "x" +
               std::to_string(cfg_.image_width) + "|" + std::to_string(cfg_.condition_dim) + "|" +
               std::to_string(cfg_.time_buckets) + "|" + std::to_string(cfg_.timesteps) + "|" +
               std::to_string(cfg_.base_seed) + "|" + diffusion::to_string(cfg_.schedule) + "|" +
               std::to_string(cfg_.sample_steps);
      case Stage::fine_tune:
        return std::to_string(cfg_.fine_tune_steps) + "|" + format_real(cfg_.learning_rate) + "|" +
               std::to_string(cfg_.batch_size) + "|" + format_real(cfg_.lambda);
      case Stage::sample: return std::to_string(cfg_.samples_per_identity);
      case Stage::filter:
        return filter::to_string(cfg_.filter_kind) + "|" + format_real(cfg_.tau_for(job.source)) + "|" +
               (cfg_.calibrate_keep ? format_real(*cfg_.calibrate_keep) : "-") + "|" + cfg_.clip_text + "|" +
               std::to_string(cfg_.filter_epochs) + "|" + source_digest();
    }
    return "";
  };
  auto output_file = [&](Stage s) -> fs::path {
    switch (s) {
      case Stage::caption: return dir / "caption.txt";
      case Stage::iir: return dir / "prompts.txt";
      case Stage::reference_set: return dir / "reference.txt";
      case Stage::fine_tune: return dir / "model.ckpt";
      case Stage::sample: return dir / "samples.bin";
      case Stage::filter: return dir / "filter.tsv";
    }
    return dir;
  };

  std::string key;
  bool upstream_reran = false;
  for (Stage s : kStages) {
    key = chain_key(key, params(s));
    if (static_cast<int>(s) < static_cast<int>(first)) continue;
    if (static_cast<int>(s) > static_cast<int>(last)) break;

    StageRecord rec;
    rec.identity_index = job.index;
    rec.identity = job.key();
    rec.stage = s;
    const auto started = std::chrono::steady_clock::now();
    const fs::path key_file = dir / (to_string(s) + ".key");
    try {
      bool cached = !upstream_reran && fs::exists(output_file(s)) && fs::exists(key_file) &&
                    read_trimmed(key_file) == key;
      if (cached && s == Stage::reference_set) cached = store.contains(read_trimmed(output_file(s)));
      if (cached) {
        rec.status = StageStatus::cached;
        if (s == Stage::iir && !registry_.claim(get_bundle().iir_token)) {
          throw IntegrityError("cached identity token '" + get_bundle().iir_token + "' is already in use");
        }
      } else {
        upstream_reran = true;
        fs::create_directories(dir);
        const std::uint64_t seed = stage_seed(job.seed, s);
        switch (s) {
          case Stage::caption:
            caption = prompt::caption_sequence(job.images, *captioner_);
            binary::write_file_atomic(output_file(s).string(), *caption + "\n");
            break;
          case Stage::iir: {
            const auto token = registry_.allocate(vocabulary_, candidates_, seed);
            bundle = prompt::build_prompts(get_caption(), token, cfg_.prompt_template);
            binary::write_file_atomic(output_file(s).string(), encode_bundle(*bundle));
            break;
          }
          case Stage::reference_set: {
            reference = backend_->reference_set(get_bundle(), cfg_.reference_set_size, seed);
            binary::write_file_atomic(output_file(s).string(), store.store(*reference) + "\n");
            break;
          }
          case Stage::fine_tune:
            handle = backend_->fine_tune(job.images, get_bundle(), get_reference(), seed);
            backend_->export_handle(*handle, output_file(s).string());
            break;
          case Stage::sample: {
            auto images = backend_->sample(get_handle(), get_bundle().enhanced_prompt, seed, cfg_.samples_per_identity);
            std::vector<filter::GeneratedSample> out(images.size());
            for (std::size_t i = 0; i < images.size(); ++i) {
              char id[16];
              std::snprintf(id, sizeof id, "g%04zu", i);
              out[i].id = id;
              out[i].seed = mix_seed(seed, i);
              out[i].image = std::move(images[i]);
            }
            binary::write_file_atomic(output_file(s).string(), encode_samples(out));
            samples = decode_samples(encode_samples(out), job, get_bundle().enhanced_prompt);
            break;
          }
          case Stage::filter: {
            const auto& sf = source_filter(job.source);
            const auto scored = filter::score_samples(sf.model, get_samples());
            if (!scored.errors.empty()) {
              throw std::runtime_error(std::to_string(scored.errors.size()) + " samples could not be scored: " +
                                       scored.errors.front().message);
            }
            outcome.report = filter::apply_threshold(scored, sf.tau);
            binary::write_file_atomic(output_file(s).string(), encode_filter(*outcome.report));
            break;
          }
        }
        binary::write_file_atomic(key_file.string(), key + "\n");
        rec.status = StageStatus::ok;
      }
      rec.outputs.push_back(output_file(s).string());
    } catch (const std::exception& e) {
      rec.status = StageStatus::failed;
      rec.error = e.what();
    }
    rec.duration_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    const bool failed = rec.status == StageStatus::failed;
    ledger_.append(rec);
    outcome.records.push_back(std::move(rec));
    if (failed) return outcome;
  }

  if (last == Stage::filter && !outcome.report) {
    try {
      const auto file = decode_filter(binary::read_file((dir / "filter.tsv").string()));
      std::map<std::string, double> scores(file.scores.begin(), file.scores.end());
      filter::FilterReport report;
      report.kind = filter::parse_filter_kind(file.kind);
      report.threshold = file.tau;
      for (const auto& s : get_samples()) {
        auto it = scores.find(s.id);
        if (it == scores.end()) throw IntegrityError("filter output misses sample " + s.id);
        filter::ScoredSample ss{s, it->second};
        (ss.score >= report.threshold ? report.kept : report.discarded).push_back(std::move(ss));
      }
      outcome.report = std::move(report);
    } catch (const std::exception& e) {
      StageRecord rec;
      rec.identity_index = job.index;
      rec.identity = job.key();
      rec.stage = Stage::filter;
      rec.status = StageStatus::failed;
      rec.error = std::string("reading cached filter output: ") + e.what();
      ledger_.append(rec);
      outcome.records.push_back(std::move(rec));
    }
  }
  return outcome;
}

PipelineResult Pipeline::run() {
  if (jobs_.empty()) throw std::invalid_argument("no source identities to process");
  std::vector<bool> alive(jobs_.size(), true);
  for (const auto& job : jobs_) {
    alive[job.index] = run_identity(job, Stage::caption, Stage::iir).records.back().status != StageStatus::failed;
  }
  std::vector<std::optional<filter::FilterReport>> reports(jobs_.size());
  parallel_for(jobs_.size(), cfg_.threads, [&](std::size_t i) {
    if (!alive[i]) return;
    auto outcome = run_identity(jobs_[i], Stage::reference_set, Stage::filter);
    reports[i] = std::move(outcome.report);
  });

  PipelineResult result;
  std::vector<filter::FilterReport> done;
  for (auto& r : reports) {
    if (r) done.push_back(std::move(*r));
  }
  const auto dataset_dir = fs::path(cfg_.output_dir) / "dataset";
  std::error_code ec;
  fs::remove_all(dataset_dir, ec);
  dataset::AssembleOptions assemble_options;
  assemble_options.crop = cfg_.crop;
  assemble_options.threads = cfg_.threads;
  result.manifest = dataset::assemble(done, dataset_dir.string(), assemble_options);

  if (cfg_.max_per_id != 0 || cfg_.min_per_id != 0) {
    auto balanced = dataset::rebalance(result.manifest, cfg_.max_per_id == 0 ? dataset::kUnbounded : cfg_.max_per_id,
                                       cfg_.min_per_id, mix_seed(cfg_.seed, fnv1a("rebalance")));
    std::set<std::string> kept;
    for (const auto& r : balanced.manifest.records) kept.insert(r.path);
    for (const auto& r : result.manifest.records) {
      if (!kept.count(r.path)) fs::remove(dataset_dir / r.path, ec);
    }
    result.manifest = std::move(balanced.manifest);
    result.deficient = std::move(balanced.deficient);
    dataset::write_manifest((dataset_dir / dataset::kManifestFileName).string(), result.manifest);
  }

  const fs::path out(cfg_.output_dir);
  result.stats = dataset::stats_report(result.manifest);
  binary::write_file_atomic((out / "stats.txt").string(), dataset::format_stats(result.stats));
  if (!result.manifest.records.empty()) {
    result.cdf = dataset::compute_identity_cdf(result.manifest, cfg_.cdf_thresholds);
    binary::write_file_atomic((out / "cdf.tsv").string(), dataset::format_curve(*result.cdf));
  }
  if (!result.deficient.empty()) {
    std::string text;
    for (const auto& d : result.deficient) text += d.identity + "\t" + std::to_string(d.count) + "\n";
    binary::write_file_atomic((out / "deficient.tsv").string(), text);
  }
  binary::write_file_atomic((out / "ledger.tsv").string(), ledger_.format());
  result.ledger = ledger_.records();
  result.failed_identities = ledger_.failed_identities();

  if (cfg_.pretrain_enabled && identity_counts(result.manifest).size() >= 2) {
    result.pretrained = pretrain::pretrain(result.manifest, dataset_dir.string(), cfg_.pretrain);
    save_checkpoint((out / "backbone.ckpt").string(), result.pretrained->checkpoint);
  }
  return result;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, PipelineOptions options) {
  Pipeline pipeline(cfg, std::move(options));
  return pipeline.run();
}

}  // namespace diffid::pipeline
