#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diffid/filter/filter.hpp"

namespace diffid::dataset {

inline constexpr int kManifestVersion = 1;
inline constexpr const char* kManifestFileName = "manifest.tsv";
/// filter_kind column value for images that never went through a filter.
inline constexpr const char* kNoFilter = "none";

struct CropSize {
  std::size_t height = 256;
  std::size_t width = 128;
  bool operator==(const CropSize&) const = default;
};

struct ManifestRecord {
  std::string path;  // relative to the manifest's directory
  std::string identity;
  std::string source;
  std::string camera;  // empty when unknown, written as "-"
  std::string filter_kind = kNoFilter;
  double score = 1.0;
  std::string split = "train";

  /// Identities are scoped by source: "source/identity".
  std::string identity_key() const { return source + "/" + identity; }
  bool operator==(const ManifestRecord&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  CropSize crop{};
  int version = kManifestVersion;

  /// Throws std::invalid_argument describing the first broken invariant.
  void validate() const;
  /// Records ordered by path.
  void sort();
  bool operator==(const DatasetManifest&) const = default;
};

std::string format_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(const std::string& text);
void write_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& path);

/// identity key -> image count.
std::map<std::string, std::size_t> identity_counts(const DatasetManifest& manifest);

struct AssembleOptions {
  CropSize crop{};
  std::string split = "train";
  std::size_t threads = 0;
};

/// Writes every kept sample to out_dir/<source>/<identity>/<sample id>.ppm
/// resized to the crop, then out_dir/manifest.tsv. Records are sorted by
/// path so the manifest does not depend on report order.
DatasetManifest assemble(std::span<const filter::FilterReport> reports, const std::string& out_dir,
                         const AssembleOptions& options = {});

// --- Identity distribution ------------------------------------------------------

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};

struct DistributionCurve {
  std::vector<CurvePoint> points;
};

/// Y(X) = 100 * |{identities with fewer than X images}| / |identities|,
/// evaluated at the thresholds sorted ascending.
DistributionCurve compute_identity_cdf(const DatasetManifest& manifest, std::vector<double> thresholds);
std::string format_curve(const DistributionCurve& curve);

// --- Summary statistics -----------------------------------------------------------

struct StatsOptions {
  std::size_t range_lo = 70;
  std::size_t range_hi = 210;
  std::size_t above = 130;
};

struct SourceStats {
  std::size_t images = 0;
  std::size_t identities = 0;
};

struct StatsReport {
  std::size_t images = 0;
  std::size_t identities = 0;
  std::size_t cameras = 0;
  double mean_images_per_identity = 0.0;
  std::map<std::string, SourceStats> per_source;
  StatsOptions options{};
  double range_share = 0.0;  // percent of identities with count in [lo, hi]
  double above_share = 0.0;  // percent of identities with count > above
  CropSize crop{};
};

StatsReport stats_report(const DatasetManifest& manifest, const StatsOptions& options = {});
double mean_images_per_identity(std::size_t images, std::size_t identities);
std::string format_stats(const StatsReport& report);

// --- Balance -----------------------------------------------------------------------

struct Deficiency {
  std::string identity;  // identity key
  std::size_t count = 0;
};

struct RebalanceResult {
  DatasetManifest manifest;
  std::vector<Deficiency> deficient;
};

/// Caps every identity at max_per_id, keeping its highest-scoring images
/// (seeded shuffle breaks score ties). Identities under min_per_id are
/// reported, never padded.
RebalanceResult rebalance(const DatasetManifest& manifest, std::size_t max_per_id, std::size_t min_per_id,
                          std::uint64_t seed);

inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

}  // namespace diffid::dataset
