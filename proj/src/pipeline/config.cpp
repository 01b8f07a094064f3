#include "diffid/pipeline/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>

#include "diffid/binary_io.hpp"
#include "diffid/errors.hpp"
#include "diffid/ini.hpp"
#include "diffid/prompt/prompts.hpp"
#include "diffid/text_format.hpp"

namespace diffid::pipeline {
namespace {

struct Field {
  const char* section;
  const char* key;
  std::function<std::string(const PipelineConfig&)> get;
  // Returns an error message, empty on success.
  std::function<std::string(PipelineConfig&, const std::string&)> set;
};

template <typename T>
Field number_field(const char* section, const char* key, T PipelineConfig::*member) {
  return {section, key,
          [member](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_real(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          },
          [member](PipelineConfig& c, const std::string& v) -> std::string {
            return parse_number(v, c.*member) ? "" : "cannot parse '" + v + "'";
          }};
}

Field text_field(const char* section, const char* key, std::string PipelineConfig::*member) {
  return {section, key, [member](const PipelineConfig& c) { return c.*member; },
          [member](PipelineConfig& c, const std::string& v) -> std::string {
            c.*member = v;
            return "";
          }};
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> list = {
      text_field("pipeline", "work_dir", &PipelineConfig::work_dir),
      text_field("pipeline", "output_dir", &PipelineConfig::output_dir),
      number_field("pipeline", "seed", &PipelineConfig::seed),
      number_field("pipeline", "threads", &PipelineConfig::threads),
      number_field("pipeline", "max_identities", &PipelineConfig::max_identities),
      {"sources", "manifests", [](const PipelineConfig& c) { return join(c.source_manifests); },
       [](PipelineConfig& c, const std::string& v) -> std::string {
         c.source_manifests = split_list(v);
         return "";
       }},
      text_field("captioner", "name", &PipelineConfig::captioner),
      text_field("iir", "candidates", &PipelineConfig::iir_candidates_path),
      text_field("iir", "vocabulary", &PipelineConfig::vocabulary_path),
      text_field("prompt", "template", &PipelineConfig::prompt_template),
      text_field("generation", "backend", &PipelineConfig::backend),
      number_field("generation", "reference_set_size", &PipelineConfig::reference_set_size),
      number_field("generation", "samples_per_identity", &PipelineConfig::samples_per_identity),
      number_field("generation", "fine_tune_steps", &PipelineConfig::fine_tune_steps),
      number_field("generation", "learning_rate", &PipelineConfig::learning_rate),
      number_field("generation", "batch_size", &PipelineConfig::batch_size),
      number_field("generation", "lambda", &PipelineConfig::lambda),
      number_field("generation", "sample_steps", &PipelineConfig::sample_steps),
      {"generation", "schedule", [](const PipelineConfig& c) { return diffusion::to_string(c.schedule); },
       [](PipelineConfig& c, const std::string& v) -> std::string {
         try {
           c.schedule = diffusion::parse_schedule_kind(v);
           return "";
         } catch (const std::exception&) {
           return "unknown schedule '" + v + "'";
         }
       }},
      number_field("generation", "image_height", &PipelineConfig::image_height),
      number_field("generation", "image_width", &PipelineConfig::image_width),
      number_field("generation", "condition_dim", &PipelineConfig::condition_dim),
      number_field("generation", "time_buckets", &PipelineConfig::time_buckets),
      number_field("generation", "timesteps", &PipelineConfig::timesteps),
      number_field("generation", "base_seed", &PipelineConfig::base_seed),
      {"filter", "kind", [](const PipelineConfig& c) { return filter::to_string(c.filter_kind); },
       [](PipelineConfig& c, const std::string& v) -> std::string {
         try {
           c.filter_kind = filter::parse_filter_kind(v);
           return "";
         } catch (const std::exception&) {
           return "unknown filter kind '" + v + "'";
         }
       }},
      number_field("filter", "tau", &PipelineConfig::tau),
      {"filter", "calibrate_keep",
       [](const PipelineConfig& c) { return c.calibrate_keep ? format_real(*c.calibrate_keep) : std::string(); },
       [](PipelineConfig& c, const std::string& v) -> std::string {
         if (v.empty()) {
           c.calibrate_keep.reset();
           return "";
         }
         double x = 0.0;
         if (!parse_number(v, x)) return "cannot parse '" + v + "'";
         c.calibrate_keep = x;
         return "";
       }},
      text_field("filter", "clip_text", &PipelineConfig::clip_text),
      number_field("filter", "epochs", &PipelineConfig::filter_epochs),
      {"dataset", "crop_height", [](const PipelineConfig& c) { return std::to_string(c.crop.height); },
       [](PipelineConfig& c, const std::string& v) -> std::string {
         return parse_number(v, c.crop.height) ? "" : "cannot parse '" + v + "'";
       }},
      {"dataset", "crop_width", [](const PipelineConfig& c) { return std::to_string(c.crop.width); },
       [](PipelineConfig& c, const std::string& v) -> std::string {
         return parse_number(v, c.crop.width) ? "" : "cannot parse '" + v + "'";
       }},
      {"dataset", "cdf_thresholds",
       [](const PipelineConfig& c) {
         std::vector<std::string> parts;
         for (double x : c.cdf_thresholds) parts.push_back(format_real(x));
         return join(parts);
       },
       [](PipelineConfig& c, const std::string& v) -> std::string {
         c.cdf_thresholds.clear();
         for (const auto& part : split_list(v)) {
           double x = 0.0;
           if (!parse_number(part, x)) return "cannot parse '" + part + "'";
           c.cdf_thresholds.push_back(x);
         }
         return "";
       }},
      number_field("dataset", "max_per_id", &PipelineConfig::max_per_id),
      number_field("dataset", "min_per_id", &PipelineConfig::min_per_id),
      {"pretrain", "enabled", [](const PipelineConfig& c) { return std::string(c.pretrain_enabled ? "true" : "false"); },
       [](PipelineConfig& c, const std::string& v) -> std::string {
         return parse_bool(v, c.pretrain_enabled) ? "" : "expected true or false, got '" + v + "'";
       }},
  };
  return list;
}

std::string env_name(const std::string& section, const std::string& key) {
  std::string name = "DIFFID_" + section + "_" + key;
  for (char& ch : name) ch = ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return name;
}

void apply_env(IniDocument& doc, const EnvLookup& env) {
  if (!env) return;
  auto consider = [&](const std::string& section, const std::string& key) {
    if (auto v = env(env_name(section, key))) doc[section][key] = *v;
  };
  for (const auto& f : fields()) consider(f.section, f.key);
  for (const auto& [key, value] : pretrain::to_values(pretrain::PretrainConfig{})) consider("pretrain", key);
  if (doc.contains("filter")) {
    std::vector<std::string> keys;
    for (const auto& [key, value] : doc["filter"]) {
      if (key.starts_with("tau.")) keys.push_back(key);
    }
    for (const auto& key : keys) consider("filter", key);
  }
}

bool path_exists(const std::string& p) {
  std::error_code ec;
  return std::filesystem::exists(p, ec);
}

void check_values(const PipelineConfig& c, std::vector<std::string>& v) {
  auto require = [&](bool ok, const char* key, const std::string& why) {
    if (!ok) v.push_back(std::string(key) + ": " + why);
  };
  require(!c.work_dir.empty(), "pipeline.work_dir", "must be non-empty");
  require(!c.output_dir.empty(), "pipeline.output_dir", "must be non-empty");
  for (const auto& m : c.source_manifests) require(path_exists(m), "sources.manifests", "no such file '" + m + "'");
  require(!c.captioner.empty(), "captioner.name", "must be non-empty");
  if (!c.iir_candidates_path.empty()) {
    require(path_exists(c.iir_candidates_path), "iir.candidates", "no such file '" + c.iir_candidates_path + "'");
  }
  if (!c.vocabulary_path.empty()) {
    require(path_exists(c.vocabulary_path), "iir.vocabulary", "no such file '" + c.vocabulary_path + "'");
  }
  try {
    prompt::build_prompts("caption", "qzx", c.prompt_template);
  } catch (const std::exception& e) {
    v.push_back(std::string("prompt.template: ") + e.what());
  }
  require(!c.backend.empty(), "generation.backend", "must be non-empty");
  require(c.reference_set_size >= 1, "generation.reference_set_size", "must be >= 1");
  require(c.samples_per_identity >= 1, "generation.samples_per_identity", "must be >= 1");
  require(c.fine_tune_steps >= 1, "generation.fine_tune_steps", "must be >= 1");
  require(c.learning_rate > 0.0, "generation.learning_rate", "must be positive");
  require(c.batch_size >= 1, "generation.batch_size", "must be >= 1");
  require(c.lambda >= 0.0, "generation.lambda", "must be non-negative");
  require(c.timesteps >= 1, "generation.timesteps", "must be >= 1");
  require(c.sample_steps >= 1 && c.sample_steps <= c.timesteps, "generation.sample_steps",
          "must be in [1, timesteps]");
  require(c.image_height >= 4, "generation.image_height", "must be >= 4");
  require(c.image_width >= 4, "generation.image_width", "must be >= 4");
  require(c.condition_dim >= 1, "generation.condition_dim", "must be >= 1");
  require(c.time_buckets >= 1 && c.time_buckets <= c.timesteps, "generation.time_buckets",
          "must be in [1, timesteps]");
  require(c.tau >= 0.0 && c.tau <= 1.0, "filter.tau", "must be in [0, 1]");
  for (const auto& [source, tau] : c.source_tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) v.push_back("filter.tau." + source + ": must be in [0, 1]");
  }
  if (c.calibrate_keep) {
    require(*c.calibrate_keep > 0.0 && *c.calibrate_keep <= 1.0, "filter.calibrate_keep", "must be in (0, 1]");
  }
  require(!c.clip_text.empty(), "filter.clip_text", "must be non-empty");
  require(c.filter_epochs >= 1, "filter.epochs", "must be >= 1");
  require(c.crop.height >= 1, "dataset.crop_height", "must be >= 1");
  require(c.crop.width >= 1, "dataset.crop_width", "must be >= 1");
  require(!c.cdf_thresholds.empty(), "dataset.cdf_thresholds", "must list at least one value");
  require(c.max_per_id == 0 || c.max_per_id >= c.min_per_id, "dataset.max_per_id", "must be 0 or >= min_per_id");
}

}  // namespace

double PipelineConfig::tau_for(const std::string& source) const {
  auto it = source_tau.find(source);
  return it == source_tau.end() ? tau : it->second;
}

bool PipelineConfig::operator==(const PipelineConfig& o) const { return serialize_config(*this) == serialize_config(o); }

EnvLookup process_environment() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  };
}

PipelineConfig validate_config(const std::string& text, const EnvLookup& env) {
  std::vector<std::string> violations;
  IniDocument doc;
  try {
    doc = parse_ini(text);
  } catch (const std::exception& e) {
    throw ValidationError({std::string("syntax: ") + e.what()});
  }
  apply_env(doc, env);

  PipelineConfig cfg;
  std::map<std::string, std::map<std::string, const Field*>> known;
  for (const auto& f : fields()) known[f.section][f.key] = &f;
  for (const auto& [section, values] : doc) {
    if (section == "pretrain") {
      auto rest = values;
      if (auto it = rest.find("enabled"); it != rest.end()) {
        if (auto err = known["pretrain"]["enabled"]->set(cfg, it->second); !err.empty()) {
          violations.push_back("pretrain.enabled: " + err);
        }
        rest.erase(it);
      }
      cfg.pretrain = pretrain::from_values(rest, violations, "pretrain.");
      continue;
    }
    auto sec = known.find(section);
    if (sec == known.end()) {
      violations.push_back((section.empty() ? std::string("<top level>") : section) + ": unknown section");
      continue;
    }
    for (const auto& [key, value] : values) {
      if (section == "filter" && key.starts_with("tau.")) {
        double x = 0.0;
        if (key.size() == 4) {
          violations.push_back("filter.tau.: missing source name");
        } else if (!parse_number(value, x)) {
          violations.push_back("filter." + key + ": cannot parse '" + value + "'");
        } else {
          cfg.source_tau[key.substr(4)] = x;
        }
        continue;
      }
      auto it = sec->second.find(key);
      if (it == sec->second.end()) {
        violations.push_back(section + "." + key + ": unknown key");
        continue;
      }
      if (auto err = it->second->set(cfg, value); !err.empty()) violations.push_back(section + "." + key + ": " + err);
    }
  }
  check_values(cfg, violations);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return cfg;
}

PipelineConfig load_config(const std::string& path, const EnvLookup& env) {
  return validate_config(binary::read_file(path), env);
}

std::string serialize_config(const PipelineConfig& cfg) {
  IniDocument doc;
  for (const auto& f : fields()) doc[f.section][f.key] = f.get(cfg);
  for (const auto& [source, tau] : cfg.source_tau) doc["filter"]["tau." + source] = format_real(tau);
  for (const auto& [key, value] : pretrain::to_values(cfg.pretrain)) doc["pretrain"][key] = value;
  return format_ini(doc);
}

}  // namespace diffid::pipeline
