#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "diffid/metrics/retrieval.hpp"
#include "diffid/random.hpp"

using namespace diffid;
using namespace diffid::metrics;

namespace {

RetrievalInstance single_query(const std::vector<int>& relevance_by_rank) {
  RetrievalInstance inst;
  inst.cross_camera = false;
  inst.queries = {{"q", ""}};
  const double n = static_cast<double>(relevance_by_rank.size());
  for (std::size_t i = 0; i < relevance_by_rank.size(); ++i) {
    inst.gallery.push_back({relevance_by_rank[i] ? "q" : "x" + std::to_string(i), ""});
    inst.similarity.push_back(n - static_cast<double>(i));
  }
  return inst;
}

bool excluded(const RetrievalInstance& inst, std::size_t q, std::size_t g) {
  const auto& a = inst.queries[q];
  const auto& b = inst.gallery[g];
  return inst.cross_camera && !a.camera.empty() && !b.camera.empty() && a.identity == b.identity &&
         a.camera == b.camera;
}

// Selection ranking: repeatedly take the highest similarity, lowest index.
std::vector<bool> oracle_relevance(const RetrievalInstance& inst, std::size_t q) {
  std::vector<bool> taken(inst.gallery.size(), false), rel;
  for (std::size_t g = 0; g < inst.gallery.size(); ++g) taken[g] = excluded(inst, q, g);
  while (true) {
    std::size_t best = inst.gallery.size();
    for (std::size_t g = 0; g < inst.gallery.size(); ++g) {
      if (!taken[g] && (best == inst.gallery.size() || inst.at(q, g) > inst.at(q, best))) best = g;
    }
    if (best == inst.gallery.size()) break;
    taken[best] = true;
    rel.push_back(inst.gallery[best].identity == inst.queries[q].identity);
  }
  return rel;
}

double oracle_ap(const std::vector<bool>& rel) {
  double sum = 0.0, hits = 0.0;
  for (std::size_t k = 0; k < rel.size(); ++k) {
    if (rel[k]) {
      hits += 1.0;
      sum += hits / static_cast<double>(k + 1);
    }
  }
  return sum / hits;
}

RetrievalInstance random_instance(Rng& rng) {
  RetrievalInstance inst;
  inst.cross_camera = rng.uniform() < 0.5;
  const std::size_t nq = 1 + rng.index(20), ng = 1 + rng.index(50), ids = 1 + rng.index(5);
  auto entry = [&] {
    return RetrievalEntry{"p" + std::to_string(rng.index(ids)), rng.uniform() < 0.2 ? "" : "c" + std::to_string(rng.index(3))};
  };
  for (std::size_t i = 0; i < nq; ++i) inst.queries.push_back(entry());
  for (std::size_t i = 0; i < ng; ++i) inst.gallery.push_back(entry());
  // Coarse values so ties are common.
  for (std::size_t i = 0; i < nq * ng; ++i) inst.similarity.push_back(static_cast<double>(rng.index(5)));
  return inst;
}

}  // namespace

TEST_CASE("average precision examples") {
  CHECK(compute_map(single_query({1})) == 1.0);
  CHECK(compute_map(single_query({1, 0, 1})) == doctest::Approx(5.0 / 6.0));
  CHECK(compute_map(single_query({0, 1, 0, 0})) == 0.5);

  RetrievalInstance tied;
  tied.cross_camera = false;
  tied.queries = {{"a", ""}};
  tied.gallery = {{"a", ""}, {"b", ""}, {"c", ""}};
  tied.similarity = {0.3, 0.3, 0.3};
  CHECK(compute_map(tied) == 1.0);
  CHECK(ranked_gallery(tied, 0) == std::vector<std::size_t>{0, 1, 2});
  tied.gallery = {{"b", ""}, {"c", ""}, {"a", ""}};
  CHECK(compute_map(tied) == doctest::Approx(1.0 / 3.0));

  RetrievalInstance none = tied;
  none.queries = {{"z", ""}};
  CHECK_THROWS_AS(compute_map(none), std::invalid_argument);
  CHECK_THROWS_AS(compute_cmc(none, 3), std::invalid_argument);
}

TEST_CASE("cmc examples") {
  const auto second = compute_cmc(single_query({0, 1, 0}), 3);
  CHECK(second == std::vector<double>{0.0, 1.0, 1.0});
  CHECK(compute_cmc(single_query({1, 0}), 4) == std::vector<double>{1.0, 1.0, 1.0, 1.0});

  RetrievalInstance two;
  two.cross_camera = false;
  two.queries = {{"a", ""}, {"b", ""}};
  two.gallery = {{"a", ""}, {"x", ""}, {"b", ""}, {"y", ""}};
  two.similarity = {4, 3, 2, 1, 4, 3, 2, 1};
  const auto cmc = compute_cmc(two, 4);
  CHECK(cmc == std::vector<double>{0.5, 0.5, 1.0, 1.0});
  CHECK_THROWS_AS(compute_cmc(two, 0), std::invalid_argument);

  const auto r = evaluate(two, 4);
  CHECK(r.rank(1) == 0.5);
  CHECK(r.rank(99) == 1.0);
  CHECK(r.valid_queries == 2);
  CHECK(format_report(r).find("rank1\t0.5") != std::string::npos);
}

TEST_CASE("cross-camera exclusion") {
  RetrievalInstance inst;
  inst.queries = {{"a", "c1"}};
  inst.gallery = {{"a", "c1"}, {"b", "c2"}, {"a", "c2"}, {"a", ""}};
  inst.similarity = {4, 3, 2, 1};
  CHECK(ranked_gallery(inst, 0) == std::vector<std::size_t>{1, 2, 3});
  CHECK(compute_map(inst) == doctest::Approx((1.0 / 2.0 + 2.0 / 3.0) / 2.0));
  inst.cross_camera = false;
  CHECK(compute_map(inst) == doctest::Approx((1.0 + 2.0 / 3.0 + 3.0 / 4.0) / 3.0));
}

TEST_CASE("map and cmc match a brute-force oracle exactly") {
  Rng rng(2024);
  std::size_t checked = 0;
  for (int t = 0; t < 400; ++t) {
    const auto inst = random_instance(rng);
    double sum = 0.0;
    std::size_t valid = 0;
    std::vector<double> first_hit;
    for (std::size_t q = 0; q < inst.queries.size(); ++q) {
      const auto rel = oracle_relevance(inst, q);
      const auto it = std::find(rel.begin(), rel.end(), true);
      if (it == rel.end()) continue;
      ++valid;
      sum += oracle_ap(rel);
      first_hit.push_back(static_cast<double>(it - rel.begin()) + 1.0);
    }
    if (valid == 0) {
      CHECK_THROWS_AS(compute_map(inst), std::invalid_argument);
      continue;
    }
    ++checked;
    CHECK(compute_map(inst) == sum / static_cast<double>(valid));
    const auto cmc = compute_cmc(inst, 50);
    for (std::size_t r = 1; r <= 50; ++r) {
      const auto hits = std::count_if(first_hit.begin(), first_hit.end(), [&](double k) { return k <= r; });
      CHECK(cmc[r - 1] == static_cast<double>(hits) / static_cast<double>(valid));
      if (r > 1) CHECK(cmc[r - 1] >= cmc[r - 2]);
    }

    auto scaled = inst;
    const double c = 0.1 + 10.0 * rng.uniform();
    for (auto& v : scaled.similarity) v *= c;
    CHECK(compute_map(scaled) == compute_map(inst));
    CHECK(compute_cmc(scaled, 50) == cmc);
  }
  CHECK(checked > 300);
}

TEST_CASE("self-retrieval over embeddings") {
  Rng rng(6);
  std::vector<std::vector<double>> embs(10, std::vector<double>(8));
  std::vector<RetrievalEntry> q, g;
  for (std::size_t i = 0; i < embs.size(); ++i) {
    for (auto& v : embs[i]) v = rng.normal();
    q.push_back({"p" + std::to_string(i), "c1"});
    g.push_back({"p" + std::to_string(i), "c2"});
  }
  const auto r = evaluate_embeddings(embs, embs, q, g, true, 5);
  CHECK(r.map == doctest::Approx(1.0));
  CHECK(r.rank(1) == 1.0);

  auto narrow = embs;
  narrow[3].pop_back();
  CHECK_THROWS_AS(evaluate_embeddings(embs, narrow, q, g), std::invalid_argument);
  CHECK_THROWS_AS(evaluate_embeddings(embs, embs, q, {}), std::invalid_argument);
}

TEST_CASE("random embeddings land on the permutation baseline") {
  Rng rng(77);
  const std::size_t nq = 100, ng = 400;
  std::vector<std::vector<double>> qe(nq, std::vector<double>(8)), ge(ng, std::vector<double>(8));
  std::vector<RetrievalEntry> q, g;
  for (std::size_t i = 0; i < nq; ++i) {
    for (auto& v : qe[i]) v = rng.normal();
    q.push_back({i % 2 ? "a" : "b", ""});
  }
  for (std::size_t i = 0; i < ng; ++i) {
    for (auto& v : ge[i]) v = rng.normal();
    g.push_back({i % 2 ? "a" : "b", ""});
  }
  const auto r = evaluate_embeddings(qe, ge, q, g, false, 10);

  // Baseline: AP of a uniformly random ranking of 200 relevant among 400.
  double baseline = 0.0;
  const int trials = 400;
  std::vector<bool> labels(ng);
  for (std::size_t i = 0; i < ng; ++i) labels[i] = i % 2;
  for (int t = 0; t < trials; ++t) {
    rng.shuffle(labels.begin(), labels.end());
    baseline += oracle_ap(labels);
  }
  baseline /= trials;
  CHECK(r.map == doctest::Approx(baseline).epsilon(0.06));
  CHECK(r.rank(1) > 0.3);
  CHECK(r.rank(1) < 0.7);
}
