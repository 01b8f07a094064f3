#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <thread>

#include "diffid/errors.hpp"
#include "diffid/prompt/captioner.hpp"
#include "diffid/prompt/iir.hpp"
#include "diffid/prompt/prompts.hpp"
#include "diffid/prompt/text_embedding.hpp"
#include "diffid/random.hpp"
#include "diffid/toy/sprites.hpp"

using namespace diffid;
using namespace diffid::prompt;

namespace {

std::vector<Image> frames(const toy::SpriteIdentity& id, std::size_t n, std::uint64_t seed) {
  std::vector<Image> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(toy::render_sprite(id, {3, 32, 16}, seed + i));
  return out;
}

// Majority per slot with first-seen tie-break, written independently of the
// captioner.
std::string majority_caption(const StubCaptioner& cap, const std::vector<Image>& images) {
  SlotValues winner;
  for (auto slot : CaptionerHandle{}.attribute_focus) {
    std::vector<std::string> order;
    std::map<std::string, int> votes;
    for (const auto& img : images) {
      const auto v = cap.describe(img).at(slot);
      if (!votes.count(v)) order.push_back(v);
      ++votes[v];
    }
    std::string best = order.front();
    for (const auto& v : order) {
      if (votes[v] > votes[best]) best = v;
    }
    winner[slot] = best;
  }
  return cap.render(winner);
}

}  // namespace

TEST_CASE("stub captioner is deterministic and names sprite attributes") {
  toy::SpriteIdentity id = toy::random_identity(4);
  id.has_bag = true;
  id.bag = toy::palette()[0].rgb;
  const auto imgs = frames(id, 1, 0);
  StubCaptioner cap;
  const auto c = caption_sequence(imgs, cap);
  CHECK(c == caption_sequence(imgs, cap));
  CHECK(c.find("wearing ") == 0);
  CHECK(c.find("carrying a red bag") != std::string::npos);
}

TEST_CASE("sequence caption is the per-slot majority of image captions") {
  StubCaptioner cap;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = toy::random_identity(seed * 2), b = toy::random_identity(seed * 2 + 1);
    auto imgs = frames(a, 2, seed);
    imgs.push_back(toy::render_sprite(b, {3, 32, 16}, seed));
    CHECK(cap.caption(imgs) == majority_caption(cap, imgs));
    // Two-to-one: every slot follows identity a.
    CHECK(cap.caption(imgs) == cap.render(cap.describe(imgs[0])) );
  }
}

TEST_CASE("ties go to the value seen first") {
  StubCaptioner cap;
  toy::SpriteIdentity a = toy::random_identity(1), b = a;
  a.shirt = toy::palette()[0].rgb;  // red
  b.shirt = toy::palette()[2].rgb;  // blue
  std::vector<Image> imgs = {toy::render_sprite(a, {3, 32, 16}, 1), toy::render_sprite(b, {3, 32, 16}, 2)};
  CHECK(cap.caption(imgs).find("red clothes") != std::string::npos);
  std::swap(imgs[0], imgs[1]);
  CHECK(cap.caption(imgs).find("blue clothes") != std::string::npos);
}

TEST_CASE("attribute focus orders and selects the slots") {
  CaptionerHandle h;
  h.attribute_focus = {AttributeSlot::scene, AttributeSlot::clothing};
  StubCaptioner cap(h);
  const auto c = cap.caption(frames(toy::random_identity(2), 1, 0));
  CHECK(c.find("door") != std::string::npos);
  CHECK(c.find("carrying") == std::string::npos);
  CHECK(c.find(", wearing") != std::string::npos);
}

TEST_CASE("captioning errors") {
  StubCaptioner cap;
  CHECK_THROWS_AS(caption_sequence({}, cap), std::invalid_argument);
  ExternalCaptioner down("blip-adapter", [](const std::vector<std::string>&) -> std::string {
    throw std::runtime_error("connection refused");
  });
  const auto imgs = frames(toy::random_identity(1), 2, 0);
  try {
    down.caption(imgs);
    FAIL("expected a backend error");
  } catch (const BackendError& e) {
    CHECK(e.backend() == "blip-adapter");
  }
  CaptionerRegistry reg;
  CHECK(reg.get("stub")->name() == "stub");
  CHECK_THROWS_AS(reg.get("missing"), BackendError);
}

TEST_CASE("external captioner passes encoded images through") {
  std::size_t seen = 0;
  ExternalCaptioner ext("echo", [&](const std::vector<std::string>& bytes) {
    seen = bytes.size();
    CHECK(decode_image(bytes[0]).shape() == ImageShape{3, 32, 16});
    return std::string("a person in a coat");
  });
  CaptionerRegistry reg;
  reg.add(std::make_shared<ExternalCaptioner>(ext));
  CHECK(caption_sequence(frames(toy::random_identity(3), 3, 0), *reg.get("echo")) == "a person in a coat");
  CHECK(seen == 3);
}

TEST_CASE("allocate_iir examples") {
  CHECK(allocate_iir({"a", "person"}, {"qzx"}, 0) == "qzx");
  CHECK_THROWS_AS(allocate_iir({"a", "b"}, {"a", "b"}, 3), ExhaustionError);
  CHECK_THROWS_AS(allocate_iir({}, {}, 3), std::invalid_argument);
  const auto& cands = default_iir_candidates();
  CHECK(allocate_iir(default_vocabulary(), cands, 11) == allocate_iir(default_vocabulary(), cands, 11));
}

TEST_CASE("default candidates are 10,000 distinct short lowercase strings") {
  const auto& c = default_iir_candidates();
  CHECK(c.size() == 10000);
  CHECK(std::set<std::string>(c.begin(), c.end()).size() == 10000);
  for (const auto& s : c) {
    CHECK((s.size() == 3 || s.size() == 4));
    CHECK(tokenize(s) == std::vector<std::string>{s});
  }
}

TEST_CASE("allocate_iir never returns a vocabulary token") {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> cands;
    const std::size_t n = 1 + rng.index(30);
    for (std::size_t i = 0; i < n; ++i) cands.push_back("t" + std::to_string(rng.index(40)));
    std::set<std::string> vocab;
    for (const auto& c : cands) {
      if (rng.uniform() < 0.7) vocab.insert(c);
    }
    const bool all_known = std::all_of(cands.begin(), cands.end(), [&](auto& c) { return vocab.count(c) > 0; });
    if (all_known) {
      CHECK_THROWS_AS(allocate_iir(vocab, cands, trial), ExhaustionError);
    } else {
      const auto tok = allocate_iir(vocab, cands, trial);
      CHECK(vocab.count(tok) == 0);
      CHECK(std::find(cands.begin(), cands.end(), tok) != cands.end());
    }
  }
}

TEST_CASE("registry never hands out a token twice, also under concurrency") {
  IirRegistry reg;
  std::set<std::string> seen;
  for (int i = 0; i < 200; ++i) CHECK(seen.insert(reg.allocate({}, default_iir_candidates(), 1)).second);

  IirRegistry shared;
  std::vector<std::string> got(16);
  std::vector<std::thread> pool;
  for (int i = 0; i < 16; ++i) {
    pool.emplace_back([&, i] { got[i] = shared.allocate(default_vocabulary(), default_iir_candidates(), 7); });
  }
  for (auto& t : pool) t.join();
  CHECK(std::set<std::string>(got.begin(), got.end()).size() == 16);
  CHECK(shared.used().size() == 16);
  CHECK_FALSE(shared.claim(got[0]));
  CHECK(shared.claim("zzzz"));

  IirRegistry tiny;
  tiny.allocate({}, {"qa", "qb"}, 0);
  tiny.allocate({}, {"qa", "qb"}, 0);
  CHECK_THROWS_AS(tiny.allocate({}, {"qa", "qb"}, 0), ExhaustionError);
}

TEST_CASE("build_prompts examples") {
  const auto b = build_prompts("walking with a red bag", "qzx");
  CHECK(b.enhanced_prompt == "a photo of qzx person, walking with a red bag");
  CHECK(b.lpe_prompt == "a photo of person, walking with a red bag");
  CHECK(b.iir_token == "qzx");
  CHECK(bundle_is_valid(b));

  const auto empty = build_prompts("", "qzx");
  CHECK(bundle_is_valid(empty));
  CHECK(count_token(empty.enhanced_prompt, "qzx") == 1);

  CHECK_THROWS_AS(build_prompts("x", "qzx", "{identity} and {identity}, {caption}"), std::invalid_argument);
  CHECK_THROWS_AS(build_prompts("x", "qzx", "{identity} only"), std::invalid_argument);
  CHECK_THROWS_AS(build_prompts("carrying a qzx", "qzx"), std::invalid_argument);
}

TEST_CASE("bundles differ only in the identity slot") {
  Rng rng(9);
  const std::vector<std::string> words = {"red", "bag", "walking", "outdoors", "coat", "with", "a", "blue"};
  for (int trial = 0; trial < 200; ++trial) {
    std::string caption;
    for (std::size_t i = 0, n = rng.index(6); i < n; ++i) caption += (i ? " " : "") + words[rng.index(words.size())];
    const auto tok = default_iir_candidates()[rng.index(10000)];
    const auto b = build_prompts(caption, tok);
    REQUIRE(bundle_is_valid(b));
    CHECK(count_token(b.enhanced_prompt, tok) == 1);
    CHECK(count_token(b.lpe_prompt, tok) == 0);
    auto removed = b.enhanced_prompt;
    removed.erase(removed.find(tok + " "), tok.size() + 1);
    CHECK(removed == b.lpe_prompt);
  }
}

TEST_CASE("text embedding reacts to the identity token") {
  const auto a = embed_text("a photo of qzx person", 16), b = embed_text("a photo of person", 16);
  CHECK(a != b);
  double norm = 0.0;
  for (double v : a) norm += v * v;
  CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(embed_text("", 16) == std::vector<double>(16, 0.0));
  CHECK(embed_text("A Photo", 8) == embed_text("a photo", 8));
  CHECK(tokenize("Hello, world-2!") == std::vector<std::string>{"hello", "world", "2"});
}
