#include <doctest.h>

#include <filesystem>
#include <map>
#include <set>

#include "diffid/binary_io.hpp"
#include "diffid/dataset/manifest.hpp"
#include "diffid/errors.hpp"
#include "diffid/random.hpp"
#include "support.hpp"

using namespace diffid;
using namespace diffid::dataset;

namespace {

DatasetManifest with_counts(const std::map<std::string, std::size_t>& counts, const std::string& source = "s") {
  DatasetManifest m;
  for (const auto& [id, n] : counts) {
    for (std::size_t i = 0; i < n; ++i) {
      ManifestRecord r;
      r.path = source + "/" + id + "/" + std::to_string(i) + ".ppm";
      r.identity = id;
      r.source = source;
      r.score = 0.5 + 0.01 * static_cast<double>(i);
      m.records.push_back(r);
    }
  }
  m.sort();
  return m;
}

DatasetManifest random_manifest(Rng& rng, std::size_t max_ids, std::size_t max_count) {
  DatasetManifest m;
  const std::vector<std::string> sources = {"toy", "market"};
  const std::size_t ids = 1 + rng.index(max_ids);
  for (std::size_t i = 0; i < ids; ++i) {
    const auto src = sources[rng.index(2)];
    const std::size_t n = 1 + rng.index(max_count);
    for (std::size_t k = 0; k < n; ++k) {
      ManifestRecord r;
      r.identity = "p" + std::to_string(i);
      r.source = src;
      r.path = src + "/" + r.identity + "/" + std::to_string(k) + ".ppm";
      r.camera = rng.uniform() < 0.5 ? "" : "c" + std::to_string(rng.index(3));
      r.score = std::round(rng.uniform() * 10) / 10;
      r.filter_kind = "reid_ctf";
      m.records.push_back(r);
    }
  }
  m.sort();
  return m;
}

filter::ScoredSample kept(std::string id, std::string identity, double score, std::uint64_t seed) {
  filter::ScoredSample s;
  s.sample.id = std::move(id);
  s.sample.identity = std::move(identity);
  s.sample.source = "toy";
  s.sample.image = test_support::random_image({3, 16, 8}, seed);
  s.score = score;
  return s;
}

}  // namespace

TEST_CASE("manifest text round-trips") {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    auto m = random_manifest(rng, 6, 5);
    m.crop = {64, 32};
    const auto text = format_manifest(m);
    CHECK(text.rfind("diffid-manifest v1\n", 0) == 0);
    CHECK(parse_manifest(text) == m);
  }
  CHECK_THROWS_AS(parse_manifest("not-a-manifest\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_manifest("diffid-manifest v1\na\tb\n"), std::invalid_argument);

  auto bad = with_counts({{"a", 1}});
  bad.records[0].score = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = with_counts({{"a", 1}});
  bad.crop = {0, 128};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("assemble writes kept samples only") {
  const auto dir = test_support::scratch_dir("assemble");
  CHECK(assemble({}, dir + "/empty").records.empty());
  CHECK(parse_manifest(binary::read_file(dir + "/empty/manifest.tsv")).records.empty());

  filter::FilterReport r;
  r.kind = filter::FilterKind::reid_ctf;
  r.threshold = 0.5;
  r.kept = {kept("g1", "a", 0.9, 1), kept("g2", "a", 0.7, 2), kept("g3", "b", 0.6, 3)};
  r.discarded = {kept("g4", "b", 0.1, 4)};
  AssembleOptions opts;
  opts.crop = {32, 16};
  const auto m = assemble(std::vector<filter::FilterReport>{r}, dir + "/out", opts);
  CHECK(m.records.size() == 3);
  CHECK(identity_counts(m).size() == 2);
  for (const auto& rec : m.records) {
    CHECK(read_pnm(dir + "/out/" + rec.path).shape() == ImageShape{3, 32, 16});
    CHECK(rec.filter_kind == "reid_ctf");
  }
  CHECK_FALSE(std::filesystem::exists(dir + "/out/toy/b/g4.ppm"));
  CHECK(read_manifest(dir + "/out/manifest.tsv") == m);

  const auto first = binary::read_file(dir + "/out/manifest.tsv");
  filter::FilterReport reordered = r;
  std::reverse(reordered.kept.begin(), reordered.kept.end());
  assemble(std::vector<filter::FilterReport>{reordered}, dir + "/out", opts);
  CHECK(binary::read_file(dir + "/out/manifest.tsv") == first);

  filter::FilterReport dup = r;
  dup.kept.push_back(kept("g1", "a", 0.8, 9));
  CHECK_THROWS_AS(assemble(std::vector<filter::FilterReport>{dup}, dir + "/dup", opts), IntegrityError);

  std::filesystem::create_directories(dir + "/blocked");
  binary::write_file_atomic(dir + "/blocked/toy", "file, not a directory");
  CHECK_THROWS_AS(assemble(std::vector<filter::FilterReport>{r}, dir + "/blocked", opts), IoError);
}

TEST_CASE("identity cdf examples") {
  const auto m = with_counts({{"a", 1}, {"b", 2}, {"c", 3}});
  const auto curve = compute_identity_cdf(m, {4, 2, 1});
  REQUIRE(curve.points.size() == 3);
  CHECK(curve.points[0].x == 1);
  CHECK(curve.points[0].y == 0.0);
  CHECK(curve.points[1].y == doctest::Approx(100.0 / 3.0));
  CHECK(curve.points[2].y == 100.0);
  CHECK_THROWS_AS(compute_identity_cdf(DatasetManifest{}, {1}), std::invalid_argument);
  CHECK(format_curve(curve).find('\t') != std::string::npos);
}

TEST_CASE("cdf and stats agree with a brute-force group-by") {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto m = random_manifest(rng, 12, 30);
    std::map<std::pair<std::string, std::string>, std::size_t> groups;
    std::set<std::string> cameras;
    std::map<std::string, std::size_t> src_images;
    std::map<std::string, std::set<std::string>> src_ids;
    for (const auto& r : m.records) {
      ++groups[{r.source, r.identity}];
      if (!r.camera.empty()) cameras.insert(r.source + "/" + r.camera);
      ++src_images[r.source];
      src_ids[r.source].insert(r.identity);
    }
    std::vector<double> xs;
    for (int x = 0; x <= 32; x += 4) xs.push_back(x);
    const auto curve = compute_identity_cdf(m, xs);
    double prev = 0.0;
    for (const auto& p : curve.points) {
      std::size_t below = 0;
      for (const auto& [k, n] : groups) below += n < p.x;
      CHECK(p.y == 100.0 * static_cast<double>(below) / static_cast<double>(groups.size()));
      CHECK(p.y >= prev);
      prev = p.y;
    }
    CHECK(curve.points.back().y == 100.0);

    StatsOptions opts{5, 20, 10};
    const auto s = stats_report(m, opts);
    std::size_t in_range = 0, above = 0;
    for (const auto& [k, n] : groups) {
      in_range += n >= 5 && n <= 20;
      above += n > 10;
    }
    CHECK(s.images == m.records.size());
    CHECK(s.identities == groups.size());
    CHECK(s.cameras == cameras.size());
    CHECK(s.range_share == 100.0 * static_cast<double>(in_range) / static_cast<double>(groups.size()));
    CHECK(s.above_share == 100.0 * static_cast<double>(above) / static_cast<double>(groups.size()));
    CHECK(s.mean_images_per_identity == static_cast<double>(m.records.size()) / static_cast<double>(groups.size()));
    for (const auto& [src, n] : src_images) {
      CHECK(s.per_source.at(src).images == n);
      CHECK(s.per_source.at(src).identities == src_ids[src].size());
    }
  }
}

TEST_CASE("stats examples") {
  CHECK(stats_report(with_counts({{"a", 2}, {"b", 2}}), {1, 2, 1}).range_share == 100.0);
  CHECK(mean_images_per_identity(777130, 5183) == doctest::Approx(149.9).epsilon(0.05 / 149.9));
  CHECK_THROWS_AS(mean_images_per_identity(1, 0), std::invalid_argument);
  const auto text = format_stats(stats_report(with_counts({{"a", 3}})));
  CHECK(text.find("images\t3") != std::string::npos);
  CHECK(text.find("person_ids\t1") != std::string::npos);
  CHECK(text.find("crop_size\t256x128") != std::string::npos);
}

TEST_CASE("rebalance examples") {
  const auto five = with_counts({{"a", 5}});
  const auto capped = rebalance(five, 3, 0, 1).manifest;
  REQUIRE(capped.records.size() == 3);
  std::vector<double> scores, expected;
  for (const auto& r : capped.records) scores.push_back(r.score);
  for (const auto& r : five.records) expected.push_back(r.score);
  std::sort(expected.rbegin(), expected.rend());
  expected.resize(3);
  std::sort(scores.rbegin(), scores.rend());
  CHECK(scores == expected);

  const auto m = with_counts({{"a", 2}, {"b", 4}});
  CHECK(rebalance(m, 4, 2, 7).manifest == m);
  CHECK(rebalance(m, kUnbounded, 0, 7).manifest == m);
  const auto flagged = rebalance(m, 10, 3, 7);
  REQUIRE(flagged.deficient.size() == 1);
  CHECK(flagged.deficient[0].identity == "s/a");
  CHECK(flagged.deficient[0].count == 2);
  CHECK_THROWS_AS(rebalance(m, 1, 2, 7), std::invalid_argument);
}

TEST_CASE("rebalance never grows or drops identities") {
  Rng rng(17);
  for (int t = 0; t < 50; ++t) {
    const auto m = random_manifest(rng, 8, 20);
    const std::size_t cap = 1 + rng.index(15);
    const auto r = rebalance(m, cap, 0, t);
    const auto before = identity_counts(m), after = identity_counts(r.manifest);
    CHECK(after.size() == before.size());
    for (const auto& [k, n] : before) CHECK(after.at(k) == std::min(n, cap));
    CHECK(r.manifest == rebalance(m, cap, 0, t).manifest);
    // The kept images are a score-descending prefix of each identity.
    for (const auto& [k, n] : before) {
      double kept_min = 2.0, dropped_max = -1.0;
      std::set<std::string> kept_paths;
      for (const auto& rec : r.manifest.records) {
        if (rec.identity_key() == k) {
          kept_min = std::min(kept_min, rec.score);
          kept_paths.insert(rec.path);
        }
      }
      for (const auto& rec : m.records) {
        if (rec.identity_key() == k && !kept_paths.count(rec.path)) dropped_max = std::max(dropped_max, rec.score);
      }
      CHECK(dropped_max <= kept_min);
    }
  }
}
