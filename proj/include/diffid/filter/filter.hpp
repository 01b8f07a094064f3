#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diffid/image.hpp"
#include "diffid/nn/backbone.hpp"
#include "diffid/nn/training.hpp"

namespace diffid::filter {

enum class FilterKind { clip, cctf, reid_ctf };

std::string to_string(FilterKind kind);
FilterKind parse_filter_kind(const std::string& name);

/// A generated image plus everything needed to score and file it.
struct GeneratedSample {
  std::string id;
  Image image;
  std::string identity;
  std::string source;
  std::string camera;  // empty when unknown
  std::string prompt;
  std::uint64_t seed = 0;
  std::map<FilterKind, double> scores;
};

/// Confidence scorer. `score` returns a value in [0, 1] or throws
/// UnknownLabelError when the sample's identity is not known to the model.
struct FilterModel {
  FilterKind kind = FilterKind::reid_ctf;
  std::function<double(const GeneratedSample&)> score;
  std::vector<std::string> provenance;  // source dataset ids; empty for clip
};

struct ScoredSample {
  GeneratedSample sample;
  double score = 0.0;
};

struct SampleError {
  std::size_t index = 0;
  std::string sample_id;
  std::string message;
};

struct ScoringResult {
  FilterKind kind = FilterKind::reid_ctf;
  std::vector<ScoredSample> scored;  // input order, failed samples omitted
  std::vector<SampleError> errors;
};

/// kept holds every sample with score >= threshold, discarded the rest.
struct FilterReport {
  double threshold = 0.0;
  FilterKind kind = FilterKind::reid_ctf;
  std::vector<ScoredSample> kept;
  std::vector<ScoredSample> discarded;
};

// --- CLIP-style text/image scorer -------------------------------------------

class JointEmbedder {
 public:
  virtual ~JointEmbedder() = default;
  virtual std::vector<double> embed_text(const std::string& text) const = 0;
  virtual std::vector<double> embed_image(const Image& image) const = 0;
};

/// Text side: hashed bag-of-words embedding. Image side: a fixed seeded
/// random projection of the image pooled to 3x8x4.
class ToyJointEmbedder final : public JointEmbedder {
 public:
  explicit ToyJointEmbedder(std::size_t dim = 32, std::uint64_t seed = 11);
  std::vector<double> embed_text(const std::string& text) const override;
  std::vector<double> embed_image(const Image& image) const override;

 private:
  std::size_t dim_;
  std::vector<double> projection_;  // dim x 96
};

/// score = (1 + cos(embed_text(class_text), embed_image(image))) / 2.
FilterModel make_clip_scorer(const std::string& class_text, std::shared_ptr<const JointEmbedder> embedder);

// --- Identity-classification confidence (CCTF) -------------------------------

struct LabeledImage {
  Image image;
  std::string identity;
};

struct LabeledSet {
  std::string source;
  std::vector<LabeledImage> images;
};

struct ClassifierConfig {
  std::size_t iterations = 300;
  double learning_rate = 0.5;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
};

/// Multinomial logistic regression on pooled-pixel features (3x8x4 plus a
/// bias), fitted by full-batch gradient descent.
class IdentityClassifier {
 public:
  static IdentityClassifier train(const LabeledSet& source, const ClassifierConfig& cfg);

  /// One probability per label, in labels() order; sums to 1.
  std::vector<double> probabilities(const Image& image) const;
  /// Probability of `identity`; UnknownLabelError when it was not trained on.
  double confidence(const Image& image, const std::string& identity) const;
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::size_t features_ = 0;
  std::vector<double> weights_;  // labels x (features + 1)
};

std::vector<double> pooled_features(const Image& image);

FilterModel train_id_classifier(const LabeledSet& source, const ClassifierConfig& cfg = {});

// --- Re-ID embedding confidence (Re-ID CTF) -----------------------------------

/// identity -> unit-norm centroid embedding.
struct EmbeddingGallery {
  std::map<std::string, std::vector<double>> centroids;
  std::size_t dim = 0;
  std::string source;

  const std::vector<double>& centroid(const std::string& identity) const;
};

using EmbedFn = std::function<std::vector<double>(const GeneratedSample&)>;

/// Centroid of each identity = normalized mean of its unit-normalized
/// embeddings.
EmbeddingGallery build_gallery(const std::string& source,
                               const std::vector<std::pair<std::string, std::vector<double>>>& labeled_embeddings);

/// score = (1 + cos(embed(sample), centroid[sample.identity])) / 2.
FilterModel make_reid_filter(std::shared_ptr<const EmbeddingGallery> gallery, EmbedFn embed);

struct ReidConfig {
  nn::BackboneConfig backbone{};
  nn::TrainingConfig training{};
  ReidConfig() {
    training.epochs = 30;
    training.warmup_epochs = 3;
    training.batch_size = 16;
    training.random_erasing = false;
  }
};

struct ReidFilter {
  FilterModel model;
  std::shared_ptr<const EmbeddingGallery> gallery;
  std::shared_ptr<const nn::Backbone> embedder;
};

/// Classification-trained backbone per source dataset; its embedding layer
/// feeds the gallery and the scorer.
ReidFilter train_reid_embedder(const LabeledSet& source, const ReidConfig& cfg = {});

// --- Scoring and thresholds ---------------------------------------------------

ScoringResult score_samples(const FilterModel& model, std::span<const GeneratedSample> samples);

FilterReport apply_threshold(const ScoringResult& scored, double tau);
FilterReport apply_threshold(std::span<const ScoredSample> scored, FilterKind kind, double tau);

/// Type-1 empirical quantile at 1 - keep_fraction: the smallest score s such
/// that at least (1 - keep_fraction) of the scores are <= s.
double calibrate_threshold(std::span<const double> held_out_scores, double keep_fraction);

// --- Embedding injection format ------------------------------------------------

/// One line per record: "<sample id> <identity> <v1> <v2> ...", whitespace
/// separated, '#' starts a comment line.
struct EmbeddingRecord {
  std::string sample_id;
  std::string identity;
  std::vector<double> embedding;
};

std::vector<EmbeddingRecord> parse_embedding_records(const std::string& text);
std::string format_embedding_records(std::span<const EmbeddingRecord> records);

/// Looks embeddings up by sample id; unknown ids raise NotFoundError.
EmbedFn injected_embeddings(std::span<const EmbeddingRecord> records);

}  // namespace diffid::filter
