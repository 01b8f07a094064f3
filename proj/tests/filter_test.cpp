#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "diffid/errors.hpp"
#include "diffid/filter/filter.hpp"
#include "diffid/random.hpp"
#include "diffid/toy/sprites.hpp"

using namespace diffid;
using namespace diffid::filter;

namespace {

class FixedEmbedder final : public JointEmbedder {
 public:
  std::vector<double> embed_text(const std::string&) const override { return {1.0, 0.0}; }
  std::vector<double> embed_image(const Image& image) const override {
    return {image.pixels()[0], image.pixels()[1]};
  }
};

GeneratedSample sample_with(std::string id, std::string identity, Image image = Image({1, 1, 2})) {
  GeneratedSample s;
  s.id = std::move(id);
  s.identity = std::move(identity);
  s.image = std::move(image);
  return s;
}

LabeledSet sprite_source(std::size_t identities, std::size_t frames) {
  LabeledSet set{"toy", {}};
  for (std::size_t i = 0; i < identities; ++i) {
    const auto id = toy::random_identity(100 + i);
    for (std::size_t f = 0; f < frames; ++f) {
      set.images.push_back({toy::render_sprite(id, {3, 32, 16}, i * 1000 + f), "p" + std::to_string(i)});
    }
  }
  return set;
}

double oracle_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("filter kinds round-trip by name") {
  for (auto k : {FilterKind::clip, FilterKind::cctf, FilterKind::reid_ctf}) CHECK(parse_filter_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_filter_kind("ctf"), std::invalid_argument);
}

TEST_CASE("clip score maps cosine onto [0, 1]") {
  const auto model = make_clip_scorer("person", std::make_shared<FixedEmbedder>());
  CHECK(model.kind == FilterKind::clip);
  CHECK(model.provenance.empty());
  CHECK(model.score(sample_with("a", "x", Image({1, 1, 2}, {1.0, 0.0}))) == doctest::Approx(1.0));
  CHECK(model.score(sample_with("b", "x", Image({1, 1, 2}, {0.0, 1.0}))) == doctest::Approx(0.5));
  CHECK(model.score(sample_with("c", "x", Image({1, 1, 2}, {-1.0, 0.0}))) == doctest::Approx(0.0));
  CHECK_THROWS_AS(make_clip_scorer("", std::make_shared<FixedEmbedder>()), std::invalid_argument);

  const auto toy_model = make_clip_scorer("a photo of a person", std::make_shared<ToyJointEmbedder>());
  const auto s = toy_model.score(sample_with("d", "x", toy::render_sprite(toy::random_identity(1), {3, 32, 16}, 0)));
  CHECK(s >= 0.0);
  CHECK(s <= 1.0);
}

TEST_CASE("identity classifier is confident on its training identities") {
  const auto src = sprite_source(3, 6);
  const auto clf = IdentityClassifier::train(src, {});
  CHECK(clf.labels() == std::vector<std::string>{"p0", "p1", "p2"});
  for (const auto& li : src.images) {
    const auto p = clf.probabilities(li.image);
    double sum = 0.0;
    for (double v : p) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(clf.confidence(li.image, li.identity) > 0.9);
  }
  CHECK_THROWS_AS(clf.confidence(src.images[0].image, "p9"), UnknownLabelError);

  const auto model = train_id_classifier(src);
  CHECK(model.kind == FilterKind::cctf);
  CHECK(model.provenance == std::vector<std::string>{"toy"});
  auto s = sample_with("g", "p1", src.images[7].image);
  CHECK(model.score(s) > 0.9);
  s.identity = "p0";
  CHECK(model.score(s) < 0.1);

  CHECK_THROWS_AS(IdentityClassifier::train(sprite_source(1, 3), {}), std::invalid_argument);
}

TEST_CASE("gallery centroids and re-id scores") {
  const auto g = std::make_shared<EmbeddingGallery>(
      build_gallery("toy", {{"a", {2.0, 0.0}}, {"a", {0.0, 3.0}}, {"b", {0.0, -1.0}}}));
  CHECK(g->dim == 2);
  const double h = 1.0 / std::sqrt(2.0);
  CHECK(g->centroid("a")[0] == doctest::Approx(h));
  CHECK(g->centroid("a")[1] == doctest::Approx(h));
  CHECK_THROWS_AS(g->centroid("c"), UnknownLabelError);
  CHECK_THROWS_AS(build_gallery("toy", {{"a", {1.0}}, {"b", {1.0, 2.0}}}), std::invalid_argument);

  // Sample embedding stored in the image pixels.
  const auto model = make_reid_filter(g, [](const GeneratedSample& s) {
    return std::vector<double>(s.image.pixels().begin(), s.image.pixels().end());
  });
  CHECK(model.provenance == std::vector<std::string>{"toy"});
  CHECK(model.score(sample_with("s", "a", Image({1, 1, 2}, {5.0, 5.0}))) == doctest::Approx(1.0));
  const double c = std::cos(std::numbers::pi / 3), s = std::sin(std::numbers::pi / 3);
  CHECK(model.score(sample_with("s", "b", Image({1, 1, 2}, {s, -c}))) == doctest::Approx(0.75));
  CHECK_THROWS_AS(model.score(sample_with("s", "z", Image({1, 1, 2}, {1.0, 0.0}))), UnknownLabelError);
}

TEST_CASE("trained re-id filter prefers the labeled identity") {
  ReidConfig cfg;
  cfg.training.epochs = 12;
  const auto src = sprite_source(3, 6);
  const auto reid = train_reid_embedder(src, cfg);
  CHECK(reid.gallery->centroids.size() == 3);
  for (const auto& [id, v] : reid.gallery->centroids) {
    double n = 0.0;
    for (double x : v) n += x * x;
    CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-9));
  }
  std::size_t right = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto img = toy::render_sprite(toy::random_identity(100 + i), {3, 32, 16}, 777 + i);
    auto own = sample_with("q", "p" + std::to_string(i), img);
    auto other = sample_with("q", "p" + std::to_string((i + 1) % 3), img);
    if (reid.model.score(own) > reid.model.score(other)) ++right;
  }
  CHECK(right == 3);
}

TEST_CASE("score_samples keeps input order and isolates failures") {
  FilterModel m;
  m.kind = FilterKind::cctf;
  m.score = [](const GeneratedSample& s) {
    if (s.identity == "unknown") throw UnknownLabelError("unknown");
    return s.image.pixels()[0];
  };
  CHECK(score_samples(m, {}).scored.empty());

  Rng rng(4);
  std::vector<GeneratedSample> samples;
  for (int i = 0; i < 30; ++i) {
    samples.push_back(sample_with("g" + std::to_string(i), i % 7 == 3 ? "unknown" : "p", Image({1, 1, 1}, {rng.uniform()})));
  }
  const auto r = score_samples(m, samples);
  CHECK(r.kind == FilterKind::cctf);
  CHECK(r.errors.size() == 4);
  CHECK(r.scored.size() == 26);
  for (const auto& e : r.errors) CHECK(samples[e.index].identity == "unknown");
  std::size_t j = 0;
  for (const auto& s : samples) {
    if (s.identity == "unknown") continue;
    CHECK(r.scored[j].sample.id == s.id);
    CHECK(r.scored[j].score == s.image.pixels()[0]);
    ++j;
  }

  auto shuffled = samples;
  rng.shuffle(shuffled.begin(), shuffled.end());
  const auto r2 = score_samples(m, shuffled);
  std::map<std::string, double> a, b;
  for (const auto& s : r.scored) a[s.sample.id] = s.score;
  for (const auto& s : r2.scored) b[s.sample.id] = s.score;
  CHECK(a == b);

  m.score = [](const GeneratedSample&) { return 1.5; };
  CHECK(score_samples(m, samples).errors.size() == samples.size());
}

TEST_CASE("threshold examples and monotonicity") {
  std::vector<ScoredSample> s;
  for (double v : {0.2, 0.9, 0.5}) s.push_back({sample_with("x", "p"), v});
  const auto r = apply_threshold(s, FilterKind::reid_ctf, 0.5);
  REQUIRE(r.kept.size() == 2);
  CHECK(r.kept[0].score == 0.9);
  CHECK(r.kept[1].score == 0.5);
  CHECK(r.discarded.size() == 1);
  CHECK(apply_threshold(s, FilterKind::reid_ctf, 0.0).kept.size() == 3);
  CHECK(apply_threshold(s, FilterKind::reid_ctf, 1.0).kept.empty());
  CHECK_THROWS_AS(apply_threshold(s, FilterKind::reid_ctf, 1.1), std::invalid_argument);
  CHECK_THROWS_AS(apply_threshold(s, FilterKind::reid_ctf, -0.1), std::invalid_argument);

  Rng rng(12);
  std::vector<ScoredSample> many;
  for (int i = 0; i < 200; ++i) many.push_back({sample_with("x", "p"), rng.uniform()});
  std::size_t prev = many.size() + 1;
  for (int k = 0; k <= 100; ++k) {
    const double tau = k / 100.0;
    const auto rep = apply_threshold(many, FilterKind::clip, tau);
    CHECK(rep.kept.size() + rep.discarded.size() == many.size());
    CHECK(rep.kept.size() <= prev);
    prev = rep.kept.size();
    const auto expected = std::count_if(many.begin(), many.end(), [&](auto& x) { return x.score >= tau; });
    CHECK(rep.kept.size() == static_cast<std::size_t>(expected));
  }
}

TEST_CASE("calibration examples and brute-force oracle") {
  CHECK(calibrate_threshold(std::vector<double>{0.8}, 0.8) == 0.8);
  std::vector<double> ten;
  for (int i = 1; i <= 10; ++i) ten.push_back(i / 10.0);
  CHECK(calibrate_threshold(ten, 0.8) == 0.2);
  CHECK(calibrate_threshold(ten, 1.0) == 0.1);
  CHECK_THROWS_AS(calibrate_threshold({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_threshold(ten, 0.0), std::invalid_argument);

  Rng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> scores(1 + rng.index(40));
    for (auto& v : scores) v = std::round(rng.uniform() * 20) / 20;
    const int keep_pct = 1 + static_cast<int>(rng.index(100));
    const double keep = keep_pct / 100.0;
    // Smallest score s with 100 * |{<= s}| >= (100 - keep_pct) * n.
    double expected = *std::max_element(scores.begin(), scores.end());
    for (double s : scores) {
      const auto le = std::count_if(scores.begin(), scores.end(), [&](double v) { return v <= s; });
      if (100 * le >= static_cast<long>((100 - keep_pct) * scores.size()) && s < expected) expected = s;
    }
    CHECK(calibrate_threshold(scores, keep) == expected);
  }
}

TEST_CASE("injected embeddings match a brute-force cosine oracle") {
  Rng rng(8);
  std::vector<EmbeddingRecord> gallery_recs, sample_recs;
  const std::vector<std::string> ids = {"a", "b", "c"};
  for (int i = 0; i < 12; ++i) {
    EmbeddingRecord r{"r" + std::to_string(i), ids[i % 3], std::vector<double>(5)};
    for (auto& v : r.embedding) v = rng.normal();
    gallery_recs.push_back(r);
  }
  for (int i = 0; i < 9; ++i) {
    EmbeddingRecord r{"s" + std::to_string(i), ids[i % 3], std::vector<double>(5)};
    for (auto& v : r.embedding) v = rng.normal();
    sample_recs.push_back(r);
  }
  const auto text = format_embedding_records(sample_recs);
  const auto parsed = parse_embedding_records("# injected\n" + text);
  REQUIRE(parsed.size() == sample_recs.size());
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    CHECK(parsed[i].sample_id == sample_recs[i].sample_id);
    CHECK(parsed[i].embedding == sample_recs[i].embedding);
  }

  std::vector<std::pair<std::string, std::vector<double>>> labeled;
  for (const auto& r : gallery_recs) labeled.emplace_back(r.identity, r.embedding);
  const auto model = make_reid_filter(std::make_shared<EmbeddingGallery>(build_gallery("inj", labeled)),
                                      injected_embeddings(parsed));
  for (const auto& r : sample_recs) {
    std::vector<double> centroid(5, 0.0);
    for (const auto& g : gallery_recs) {
      if (g.identity != r.identity) continue;
      double n = 0.0;
      for (double v : g.embedding) n += v * v;
      for (std::size_t k = 0; k < 5; ++k) centroid[k] += g.embedding[k] / std::sqrt(n);
    }
    const double expected = (1.0 + oracle_cosine(r.embedding, centroid)) / 2.0;
    CHECK(model.score(sample_with(r.sample_id, r.identity)) == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK_THROWS_AS(model.score(sample_with("zz", "a")), NotFoundError);
  CHECK_THROWS_AS(parse_embedding_records("only-id\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_embedding_records("x a 1.0 nope\n"), std::invalid_argument);
}
