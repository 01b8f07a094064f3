#include "diffid/metrics/retrieval.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "diffid/nn/backbone.hpp"
#include "diffid/parallel.hpp"

namespace diffid::metrics {
namespace {

void validate(const RetrievalInstance& inst) {
  if (inst.similarity.size() != inst.queries.size() * inst.gallery.size()) {
    throw std::invalid_argument("similarity matrix is not queries x gallery");
  }
}

bool excluded(const RetrievalInstance& inst, const RetrievalEntry& q, const RetrievalEntry& g) {
  return inst.cross_camera && !q.camera.empty() && !g.camera.empty() && q.identity == g.identity &&
         q.camera == g.camera;
}

struct QueryOutcome {
  bool valid = false;
  double ap = 0.0;
  std::size_t first_hit = 0;  // 1-based rank of the first relevant entry
};

QueryOutcome evaluate_query(const RetrievalInstance& inst, std::size_t q) {
  const auto order = ranked_gallery(inst, q);
  QueryOutcome out;
  std::size_t hits = 0;
  double precision_sum = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (inst.gallery[order[k]].identity != inst.queries[q].identity) continue;
    ++hits;
    if (hits == 1) out.first_hit = k + 1;
    precision_sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  if (hits == 0) return out;
  out.valid = true;
  out.ap = precision_sum / static_cast<double>(hits);
  return out;
}

std::vector<QueryOutcome> evaluate_all(const RetrievalInstance& inst) {
  validate(inst);
  std::vector<QueryOutcome> outcomes(inst.queries.size());
  parallel_for(inst.queries.size(), inst.queries.size() > 64 ? 0 : 1,
               [&](std::size_t q) { outcomes[q] = evaluate_query(inst, q); });
  if (std::none_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.valid; })) {
    throw std::invalid_argument("no query has a relevant gallery entry");
  }
  return outcomes;
}

}  // namespace

double RetrievalResult::rank(std::size_t r) const {
  if (r == 0 || cmc.empty()) throw std::invalid_argument("rank is 1-based and needs a non-empty curve");
  return cmc[std::min(r, cmc.size()) - 1];
}

std::vector<std::size_t> ranked_gallery(const RetrievalInstance& inst, std::size_t query) {
  std::vector<std::size_t> order;
  order.reserve(inst.gallery.size());
  for (std::size_t g = 0; g < inst.gallery.size(); ++g) {
    if (!excluded(inst, inst.queries[query], inst.gallery[g])) order.push_back(g);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return inst.at(query, a) > inst.at(query, b); });
  return order;
}

double compute_map(const RetrievalInstance& inst) { return evaluate(inst, 1).map; }

std::vector<double> compute_cmc(const RetrievalInstance& inst, std::size_t max_rank) {
  return evaluate(inst, max_rank).cmc;
}

RetrievalResult evaluate(const RetrievalInstance& inst, std::size_t max_rank) {
  if (max_rank < 1) throw std::invalid_argument("max_rank must be >= 1");
  const auto outcomes = evaluate_all(inst);
  RetrievalResult r;
  r.cmc.assign(max_rank, 0.0);
  double ap_sum = 0.0;
  for (const auto& o : outcomes) {
    if (!o.valid) continue;
    ++r.valid_queries;
    ap_sum += o.ap;
    for (std::size_t k = o.first_hit; k <= max_rank; ++k) r.cmc[k - 1] += 1.0;
  }
  const double n = static_cast<double>(r.valid_queries);
  r.map = ap_sum / n;
  for (double& v : r.cmc) v /= n;
  return r;
}

RetrievalResult evaluate_embeddings(const std::vector<std::vector<double>>& query_embeddings,
                                    const std::vector<std::vector<double>>& gallery_embeddings,
                                    std::vector<RetrievalEntry> queries, std::vector<RetrievalEntry> gallery,
                                    bool cross_camera, std::size_t max_rank) {
  if (query_embeddings.size() != queries.size() || gallery_embeddings.size() != gallery.size()) {
    throw std::invalid_argument("one embedding per query and gallery entry is required");
  }
  std::size_t width = 0;
  for (const auto* set : {&query_embeddings, &gallery_embeddings}) {
    for (const auto& e : *set) {
      if (width == 0) width = e.size();
      if (e.size() != width) throw std::invalid_argument("embedding widths do not match");
    }
  }
  RetrievalInstance inst;
  inst.queries = std::move(queries);
  inst.gallery = std::move(gallery);
  inst.cross_camera = cross_camera;
  inst.similarity.resize(inst.queries.size() * inst.gallery.size());
  for (std::size_t q = 0; q < inst.queries.size(); ++q) {
    for (std::size_t g = 0; g < inst.gallery.size(); ++g) {
      inst.similarity[q * inst.gallery.size() + g] = nn::cosine_similarity(query_embeddings[q], gallery_embeddings[g]);
    }
  }
  return evaluate(inst, max_rank);
}

std::string format_report(const RetrievalResult& result) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "map\t" << result.map << "\n";
  for (std::size_t r : {1, 5, 10}) out << "rank" << r << "\t" << result.rank(r) << "\n";
  return out.str();
}

}  // namespace diffid::metrics
