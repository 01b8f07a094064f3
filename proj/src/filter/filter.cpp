#include "diffid/filter/filter.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "diffid/errors.hpp"
#include "diffid/prompt/text_embedding.hpp"
#include "diffid/random.hpp"

namespace diffid::filter {

std::string to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::clip: return "clip";
    case FilterKind::cctf: return "cctf";
    case FilterKind::reid_ctf: return "reid_ctf";
  }
  return "unknown";
}

FilterKind parse_filter_kind(const std::string& name) {
  if (name == "clip") return FilterKind::clip;
  if (name == "cctf") return FilterKind::cctf;
  if (name == "reid_ctf") return FilterKind::reid_ctf;
  throw std::invalid_argument("unknown filter kind '" + name + "' (expected clip, cctf or reid_ctf)");
}

namespace {

double to_unit_interval(double cosine) { return std::clamp((1.0 + cosine) / 2.0, 0.0, 1.0); }

}  // namespace

std::vector<double> pooled_features(const Image& image) {
  Image small = resize(image, 8, 4);
  std::vector<double> out(small.pixels().begin(), small.pixels().end());
  // Grayscale inputs are broadcast so every image yields 96 features.
  if (small.shape().channels == 1) {
    out.resize(96);
    for (std::size_t c = 1; c < 3; ++c) std::copy_n(out.begin(), 32, out.begin() + static_cast<long>(32 * c));
  }
  return out;
}

// --- clip ----------------------------------------------------------------------

ToyJointEmbedder::ToyJointEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), projection_(dim * 96) {
  if (dim == 0) throw std::invalid_argument("joint embedding width must be positive");
  Rng rng(seed);
  rng.fill_normal(projection_, 1.0 / std::sqrt(96.0));
}

std::vector<double> ToyJointEmbedder::embed_text(const std::string& text) const {
  return prompt::embed_text(text, dim_);
}

std::vector<double> ToyJointEmbedder::embed_image(const Image& image) const {
  const auto f = pooled_features(image);
  std::vector<double> out(dim_, 0.0);
  for (std::size_t d = 0; d < dim_; ++d) {
    const double* row = projection_.data() + d * 96;
    for (std::size_t i = 0; i < 96; ++i) out[d] += row[i] * f[i];
  }
  nn::normalize(out);
  return out;
}

FilterModel make_clip_scorer(const std::string& class_text, std::shared_ptr<const JointEmbedder> embedder) {
  if (class_text.empty()) throw std::invalid_argument("clip scorer needs a non-empty class text");
  if (!embedder) throw std::invalid_argument("clip scorer needs an embedder");
  auto text_embedding = std::make_shared<const std::vector<double>>(embedder->embed_text(class_text));
  FilterModel m;
  m.kind = FilterKind::clip;
  m.score = [embedder, text_embedding](const GeneratedSample& s) {
    return to_unit_interval(nn::cosine_similarity(*text_embedding, embedder->embed_image(s.image)));
  };
  return m;
}

// --- cctf ----------------------------------------------------------------------

namespace {

std::vector<std::string> sorted_labels(const LabeledSet& source) {
  std::vector<std::string> labels;
  for (const auto& li : source.images) labels.push_back(li.identity);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

void require_trainable(const LabeledSet& source) {
  if (sorted_labels(source).size() < 2) {
    throw std::invalid_argument("identity models need at least two identities in source '" + source.source + "'");
  }
}

}  // namespace

IdentityClassifier IdentityClassifier::train(const LabeledSet& source, const ClassifierConfig& cfg) {
  require_trainable(source);
  IdentityClassifier clf;
  clf.labels_ = sorted_labels(source);
  clf.features_ = 96;
  const std::size_t k = clf.labels_.size(), d = clf.features_ + 1;
  clf.weights_.assign(k * d, 0.0);
  Rng rng(cfg.seed);
  rng.fill_normal(clf.weights_, 0.01);

  std::vector<std::vector<double>> xs;
  std::vector<std::size_t> ys;
  for (const auto& li : source.images) {
    auto f = pooled_features(li.image);
    f.push_back(1.0);
    xs.push_back(std::move(f));
    ys.push_back(static_cast<std::size_t>(std::lower_bound(clf.labels_.begin(), clf.labels_.end(), li.identity) -
                                          clf.labels_.begin()));
  }
  const double inv_n = 1.0 / static_cast<double>(xs.size());
  std::vector<double> grad(clf.weights_.size());
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      std::vector<double> logits(k, 0.0);
      for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < d; ++j) logits[c] += clf.weights_[c * d + j] * xs[i][j];
      auto p = nn::softmax(logits);
      p[ys[i]] -= 1.0;
      for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < d; ++j) grad[c * d + j] += p[c] * xs[i][j] * inv_n;
    }
    for (std::size_t w = 0; w < grad.size(); ++w) {
      clf.weights_[w] -= cfg.learning_rate * (grad[w] + cfg.l2 * clf.weights_[w]);
    }
  }
  return clf;
}

std::vector<double> IdentityClassifier::probabilities(const Image& image) const {
  auto f = pooled_features(image);
  f.push_back(1.0);
  const std::size_t k = labels_.size(), d = features_ + 1;
  std::vector<double> logits(k, 0.0);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < d; ++j) logits[c] += weights_[c * d + j] * f[j];
  return nn::softmax(logits);
}

double IdentityClassifier::confidence(const Image& image, const std::string& identity) const {
  auto it = std::lower_bound(labels_.begin(), labels_.end(), identity);
  if (it == labels_.end() || *it != identity) throw UnknownLabelError("identity '" + identity + "' is unknown to the classifier");
  return probabilities(image)[static_cast<std::size_t>(it - labels_.begin())];
}

FilterModel train_id_classifier(const LabeledSet& source, const ClassifierConfig& cfg) {
  auto clf = std::make_shared<const IdentityClassifier>(IdentityClassifier::train(source, cfg));
  FilterModel m;
  m.kind = FilterKind::cctf;
  m.provenance = {source.source};
  m.score = [clf](const GeneratedSample& s) { return clf->confidence(s.image, s.identity); };
  return m;
}

// --- reid ----------------------------------------------------------------------

const std::vector<double>& EmbeddingGallery::centroid(const std::string& identity) const {
  auto it = centroids.find(identity);
  if (it == centroids.end()) {
    throw UnknownLabelError("identity '" + identity + "' has no centroid in gallery '" + source + "'");
  }
  return it->second;
}

EmbeddingGallery build_gallery(const std::string& source,
                               const std::vector<std::pair<std::string, std::vector<double>>>& labeled) {
  EmbeddingGallery g;
  g.source = source;
  for (const auto& [identity, emb] : labeled) {
    if (g.dim == 0) g.dim = emb.size();
    if (emb.size() != g.dim || g.dim == 0) throw std::invalid_argument("gallery embeddings must share one non-zero width");
    auto unit = emb;
    nn::normalize(unit);
    auto& c = g.centroids[identity];
    if (c.empty()) c.assign(g.dim, 0.0);
    for (std::size_t i = 0; i < g.dim; ++i) c[i] += unit[i];
  }
  for (auto& [identity, c] : g.centroids) nn::normalize(c);
  return g;
}

FilterModel make_reid_filter(std::shared_ptr<const EmbeddingGallery> gallery, EmbedFn embed) {
  FilterModel m;
  m.kind = FilterKind::reid_ctf;
  m.provenance = {gallery->source};
  m.score = [gallery, embed = std::move(embed)](const GeneratedSample& s) {
    const auto& centroid = gallery->centroid(s.identity);
    const auto e = embed(s);
    if (e.size() != gallery->dim) throw std::invalid_argument("embedding width does not match the gallery");
    return to_unit_interval(nn::cosine_similarity(e, centroid));
  };
  return m;
}

ReidFilter train_reid_embedder(const LabeledSet& source, const ReidConfig& cfg) {
  require_trainable(source);
  const auto labels = sorted_labels(source);
  auto backbone = nn::Backbone::initialized(cfg.backbone, mix_seed(cfg.training.seed, 1));
  auto head = nn::LinearHead::initialized(cfg.backbone.embedding_dim, labels.size(), mix_seed(cfg.training.seed, 2));
  std::vector<Image> inputs;
  std::vector<std::size_t> ys;
  for (const auto& li : source.images) {
    inputs.push_back(backbone.prepare(li.image));
    ys.push_back(static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), li.identity) - labels.begin()));
  }
  nn::train_classifier(backbone, head, inputs, ys, cfg.training);

  auto embedder = std::make_shared<const nn::Backbone>(std::move(backbone));
  std::vector<std::pair<std::string, std::vector<double>>> labeled;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    labeled.emplace_back(source.images[i].identity, embedder->forward(inputs[i]).embedding);
  }
  auto gallery = std::make_shared<const EmbeddingGallery>(build_gallery(source.source, labeled));
  ReidFilter out;
  out.embedder = embedder;
  out.gallery = gallery;
  out.model = make_reid_filter(gallery, [embedder](const GeneratedSample& s) { return embedder->embed(s.image); });
  return out;
}

// --- scoring -------------------------------------------------------------------

ScoringResult score_samples(const FilterModel& model, std::span<const GeneratedSample> samples) {
  ScoringResult out;
  out.kind = model.kind;
  out.scored.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    try {
      const double s = model.score(samples[i]);
      if (!(s >= 0.0 && s <= 1.0)) throw std::range_error("score " + std::to_string(s) + " outside [0, 1]");
      ScoredSample scored{samples[i], s};
      scored.sample.scores[model.kind] = s;
      out.scored.push_back(std::move(scored));
    } catch (const std::exception& e) {
      out.errors.push_back({i, samples[i].id, e.what()});
    }
  }
  return out;
}

FilterReport apply_threshold(std::span<const ScoredSample> scored, FilterKind kind, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("threshold must lie in [0, 1]");
  FilterReport report;
  report.threshold = tau;
  report.kind = kind;
  for (const auto& s : scored) (s.score >= tau ? report.kept : report.discarded).push_back(s);
  return report;
}

FilterReport apply_threshold(const ScoringResult& scored, double tau) {
  return apply_threshold(scored.scored, scored.kind, tau);
}

double calibrate_threshold(std::span<const double> held_out_scores, double keep_fraction) {
  if (held_out_scores.empty()) throw std::invalid_argument("calibration needs at least one held-out score");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw std::invalid_argument("keep fraction must lie in (0, 1]");
  std::vector<double> sorted(held_out_scores.begin(), held_out_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  const double rank = std::ceil((1.0 - keep_fraction) * n - 1e-9);
  const auto idx = static_cast<std::size_t>(std::clamp(rank - 1.0, 0.0, n - 1.0));
  return sorted[idx];
}

// --- injection format ------------------------------------------------------------

std::vector<EmbeddingRecord> parse_embedding_records(const std::string& text) {
  std::vector<EmbeddingRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    EmbeddingRecord r;
    std::string tok;
    if (!(fields >> r.sample_id >> r.identity)) {
      throw std::invalid_argument("embedding record line " + std::to_string(line_no) + " lacks id and identity");
    }
    while (fields >> tok) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw std::invalid_argument("embedding record line " + std::to_string(line_no) + ": bad number '" + tok + "'");
      }
      r.embedding.push_back(v);
    }
    if (r.embedding.empty()) throw std::invalid_argument("embedding record line " + std::to_string(line_no) + " has no values");
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_embedding_records(std::span<const EmbeddingRecord> records) {
  std::string out;
  char buf[64];
  for (const auto& r : records) {
    out += r.sample_id + " " + r.identity;
    for (double v : r.embedding) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out += ' ';
      out.append(buf, ptr);
    }
    out += '\n';
  }
  return out;
}

EmbedFn injected_embeddings(std::span<const EmbeddingRecord> records) {
  auto table = std::make_shared<std::unordered_map<std::string, std::vector<double>>>();
  for (const auto& r : records) (*table)[r.sample_id] = r.embedding;
  return [table](const GeneratedSample& s) {
    auto it = table->find(s.id);
    if (it == table->end()) throw NotFoundError("no injected embedding for sample '" + s.id + "'");
    return it->second;
  };
}

}  // namespace diffid::filter
