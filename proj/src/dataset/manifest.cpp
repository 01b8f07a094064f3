#include "diffid/dataset/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>

#include "diffid/binary_io.hpp"
#include "diffid/errors.hpp"
#include "diffid/parallel.hpp"
#include "diffid/random.hpp"

namespace diffid::dataset {
namespace {

const std::string kHeader = "diffid-manifest v" + std::to_string(kManifestVersion);

bool has_control(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; });
}

void check_component(const std::string& what, const std::string& value) {
  if (value.empty() || value == "." || value == ".." || value.find('/') != std::string::npos ||
      value.find('\\') != std::string::npos || has_control(value)) {
    throw std::invalid_argument(what + " is not usable as a path component: '" + value + "'");
  }
}

std::string format_score(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_score(const std::string& s, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("manifest line " + std::to_string(line) + ": bad score '" + s + "'");
  }
  return v;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double percent(std::size_t part, std::size_t whole) {
  return 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

}  // namespace

void DatasetManifest::validate() const {
  if (version != kManifestVersion) throw std::invalid_argument("unsupported manifest version");
  if (crop.height == 0 || crop.width == 0) throw std::invalid_argument("crop size must be positive");
  std::set<std::string> paths;
  for (const auto& r : records) {
    if (r.path.empty()) throw std::invalid_argument("manifest record with empty path");
    if (r.identity.empty()) throw std::invalid_argument("manifest record with empty identity: " + r.path);
    if (r.source.empty()) throw std::invalid_argument("manifest record with empty source: " + r.path);
    if (!(r.score >= 0.0 && r.score <= 1.0)) throw std::invalid_argument("filter score outside [0,1]: " + r.path);
    if (r.split.empty() || r.filter_kind.empty()) throw std::invalid_argument("empty split or filter kind: " + r.path);
    for (const auto* f : {&r.path, &r.identity, &r.source, &r.camera, &r.filter_kind, &r.split}) {
      if (has_control(*f)) throw std::invalid_argument("manifest field contains a tab or newline: " + r.path);
    }
    if (r.camera == "-") throw std::invalid_argument("camera '-' is reserved for unknown: " + r.path);
    if (!paths.insert(r.path).second) throw std::invalid_argument("duplicate manifest path: " + r.path);
  }
}

void DatasetManifest::sort() {
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
}

std::string format_manifest(const DatasetManifest& manifest) {
  manifest.validate();
  std::string out = kHeader + "\n";
  out += "# crop_size " + std::to_string(manifest.crop.height) + "x" + std::to_string(manifest.crop.width) + "\n";
  for (const auto& r : manifest.records) {
    out += r.path + "\t" + r.identity + "\t" + r.source + "\t" + (r.camera.empty() ? "-" : r.camera) + "\t" +
           r.filter_kind + "\t" + format_score(r.score) + "\t" + r.split + "\n";
  }
  return out;
}

DatasetManifest parse_manifest(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw std::invalid_argument("not a manifest: expected header '" + kHeader + "'");
  }
  DatasetManifest m;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream c(line.substr(1));
      std::string key, value;
      c >> key >> value;
      if (key == "crop_size") {
        auto x = value.find('x');
        if (x == std::string::npos) throw std::invalid_argument("bad crop_size: " + value);
        m.crop.height = std::stoul(value.substr(0, x));
        m.crop.width = std::stoul(value.substr(x + 1));
      }
      continue;
    }
    auto f = split_tabs(line);
    if (f.size() != 7) {
      throw std::invalid_argument("manifest line " + std::to_string(line_no) + ": expected 7 fields, got " +
                                  std::to_string(f.size()));
    }
    ManifestRecord r;
    r.path = f[0];
    r.identity = f[1];
    r.source = f[2];
    r.camera = f[3] == "-" ? "" : f[3];
    r.filter_kind = f[4];
    r.score = parse_score(f[5], line_no);
    r.split = f[6];
    m.records.push_back(std::move(r));
  }
  m.validate();
  return m;
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
  binary::write_file_atomic(path, format_manifest(manifest));
}

DatasetManifest read_manifest(const std::string& path) { return parse_manifest(binary::read_file(path)); }

std::map<std::string, std::size_t> identity_counts(const DatasetManifest& manifest) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : manifest.records) ++counts[r.identity_key()];
  return counts;
}

DatasetManifest assemble(std::span<const filter::FilterReport> reports, const std::string& out_dir,
                         const AssembleOptions& options) {
  if (options.crop.height == 0 || options.crop.width == 0) throw std::invalid_argument("crop size must be positive");
  struct Job {
    const filter::ScoredSample* item;
    filter::FilterKind kind;
  };
  std::vector<Job> jobs;
  for (const auto& report : reports) {
    for (const auto& s : report.kept) jobs.push_back({&s, report.kind});
  }

  DatasetManifest manifest;
  manifest.crop = options.crop;
  std::set<std::string> paths;
  for (const auto& job : jobs) {
    const auto& s = job.item->sample;
    check_component("source", s.source);
    check_component("identity", s.identity);
    check_component("sample id", s.id);
    ManifestRecord r;
    r.path = s.source + "/" + s.identity + "/" + s.id + ".ppm";
    if (!paths.insert(r.path).second) throw IntegrityError("two samples map to the same path: " + r.path);
    r.identity = s.identity;
    r.source = s.source;
    r.camera = s.camera;
    r.filter_kind = filter::to_string(job.kind);
    r.score = job.item->score;
    r.split = options.split;
    manifest.records.push_back(std::move(r));
  }
  manifest.validate();

  const std::filesystem::path root(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
  std::mutex dir_mutex;
  parallel_for(jobs.size(), options.threads, [&](std::size_t i) {
    const auto target = root / manifest.records[i].path;
    {
      std::lock_guard lock(dir_mutex);
      std::error_code dir_ec;
      std::filesystem::create_directories(target.parent_path(), dir_ec);
      if (dir_ec) throw IoError("cannot create directory " + target.parent_path().string() + ": " + dir_ec.message());
    }
    write_pnm(target.string(), resize(jobs[i].item->sample.image, options.crop.height, options.crop.width));
  });

  manifest.sort();
  write_manifest((root / kManifestFileName).string(), manifest);
  return manifest;
}

DistributionCurve compute_identity_cdf(const DatasetManifest& manifest, std::vector<double> thresholds) {
  if (manifest.records.empty()) throw std::invalid_argument("identity CDF of an empty manifest");
  const auto counts = identity_counts(manifest);
  std::vector<std::size_t> sorted;
  for (const auto& [id, n] : counts) sorted.push_back(n);
  std::sort(sorted.begin(), sorted.end());
  std::sort(thresholds.begin(), thresholds.end());
  DistributionCurve curve;
  for (double x : thresholds) {
    auto below = std::partition_point(sorted.begin(), sorted.end(),
                                      [x](std::size_t n) { return static_cast<double>(n) < x; });
    curve.points.push_back({x, percent(static_cast<std::size_t>(below - sorted.begin()), sorted.size())});
  }
  return curve;
}

std::string format_curve(const DistributionCurve& curve) {
  std::string out;
  for (const auto& p : curve.points) out += format_score(p.x) + "\t" + format_score(p.y) + "\n";
  return out;
}

double mean_images_per_identity(std::size_t images, std::size_t identities) {
  if (identities == 0) throw std::invalid_argument("mean over zero identities");
  return static_cast<double>(images) / static_cast<double>(identities);
}

StatsReport stats_report(const DatasetManifest& manifest, const StatsOptions& options) {
  manifest.validate();
  if (options.range_lo > options.range_hi) throw std::invalid_argument("count range lower bound exceeds upper bound");
  StatsReport r;
  r.options = options;
  r.crop = manifest.crop;
  r.images = manifest.records.size();
  const auto counts = identity_counts(manifest);
  r.identities = counts.size();
  std::set<std::string> cameras;
  std::map<std::string, std::set<std::string>> source_ids;
  for (const auto& rec : manifest.records) {
    ++r.per_source[rec.source].images;
    source_ids[rec.source].insert(rec.identity);
    if (!rec.camera.empty()) cameras.insert(rec.source + "/" + rec.camera);
  }
  for (auto& [source, s] : r.per_source) s.identities = source_ids[source].size();
  r.cameras = cameras.size();
  if (r.identities == 0) return r;
  r.mean_images_per_identity = mean_images_per_identity(r.images, r.identities);
  std::size_t in_range = 0, above = 0;
  for (const auto& [id, n] : counts) {
    if (n >= options.range_lo && n <= options.range_hi) ++in_range;
    if (n > options.above) ++above;
  }
  r.range_share = percent(in_range, r.identities);
  r.above_share = percent(above, r.identities);
  return r;
}

std::string format_stats(const StatsReport& r) {
  std::ostringstream out;
  out << "images\t" << r.images << "\n";
  out << "scene\t" << (r.cameras == 0 ? std::string("vary") : std::to_string(r.cameras)) << "\n";
  out << "person_ids\t" << r.identities << "\n";
  out << "labeled\tyes\n";
  out << "environment\t" << (r.cameras == 0 ? "synthetic" : "mixed") << "\n";
  out << "crop_size\t" << r.crop.height << "x" << r.crop.width << "\n";
  out << "mean_images_per_id\t" << format_score(r.mean_images_per_identity) << "\n";
  out << "share_in_range_" << r.options.range_lo << "_" << r.options.range_hi << "\t" << format_score(r.range_share)
      << "\n";
  out << "share_above_" << r.options.above << "\t" << format_score(r.above_share) << "\n";
  for (const auto& [source, s] : r.per_source) {
    out << "source." << source << ".images\t" << s.images << "\n";
    out << "source." << source << ".person_ids\t" << s.identities << "\n";
  }
  return out.str();
}

RebalanceResult rebalance(const DatasetManifest& manifest, std::size_t max_per_id, std::size_t min_per_id,
                          std::uint64_t seed) {
  if (max_per_id < min_per_id) throw std::invalid_argument("rebalance: max_per_id < min_per_id");
  manifest.validate();
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) groups[manifest.records[i].identity_key()].push_back(i);

  RebalanceResult result;
  std::vector<bool> keep(manifest.records.size(), true);
  std::size_t group_index = 0;
  for (auto& [key, members] : groups) {
    const std::uint64_t group_seed = mix_seed(seed, group_index++);
    if (members.size() < min_per_id) result.deficient.push_back({key, members.size()});
    if (members.size() <= max_per_id) continue;
    auto order = members;
    Rng rng(group_seed);
    rng.shuffle(order.begin(), order.end());
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return manifest.records[a].score > manifest.records[b].score;
    });
    for (std::size_t k = max_per_id; k < order.size(); ++k) keep[order[k]] = false;
  }
  result.manifest.crop = manifest.crop;
  result.manifest.version = manifest.version;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    if (keep[i]) result.manifest.records.push_back(manifest.records[i]);
  }
  return result;
}

}  // namespace diffid::dataset
