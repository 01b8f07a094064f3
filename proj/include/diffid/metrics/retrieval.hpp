#pragma once

#include <span>
#include <string>
#include <vector>

namespace diffid::metrics {

struct RetrievalEntry {
  std::string identity;
  std::string camera;  // empty when unknown
};

/// Query x gallery similarity matrix, row-major.
struct RetrievalInstance {
  std::vector<RetrievalEntry> queries;
  std::vector<RetrievalEntry> gallery;
  std::vector<double> similarity;
  /// Drop gallery entries that share both identity and camera with the
  /// query. Only applies when both cameras are known.
  bool cross_camera = true;

  double at(std::size_t q, std::size_t g) const { return similarity[q * gallery.size() + g]; }
};

struct RetrievalResult {
  double map = 0.0;
  std::vector<double> cmc;  // cmc[r-1] = fraction of queries matched within rank r
  std::size_t valid_queries = 0;

  double rank(std::size_t r) const;  // 1-based; saturates past the curve
};

/// Gallery order for one query: similarity descending, ties broken by
/// ascending gallery index, excluded entries removed.
std::vector<std::size_t> ranked_gallery(const RetrievalInstance& inst, std::size_t query);

/// Mean over valid queries of average precision. Queries without a
/// relevant gallery entry are skipped; if none remain this throws.
double compute_map(const RetrievalInstance& inst);
std::vector<double> compute_cmc(const RetrievalInstance& inst, std::size_t max_rank);
RetrievalResult evaluate(const RetrievalInstance& inst, std::size_t max_rank = 50);

/// Cosine-similarity instance from embeddings, then evaluate().
RetrievalResult evaluate_embeddings(const std::vector<std::vector<double>>& query_embeddings,
                                    const std::vector<std::vector<double>>& gallery_embeddings,
                                    std::vector<RetrievalEntry> queries, std::vector<RetrievalEntry> gallery,
                                    bool cross_camera = true, std::size_t max_rank = 50);

/// "map", "rank1", "rank5", "rank10" as key<TAB>value lines.
std::string format_report(const RetrievalResult& result);

}  // namespace diffid::metrics
