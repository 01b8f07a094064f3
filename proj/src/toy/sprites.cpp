#include "diffid/toy/sprites.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "diffid/random.hpp"

namespace diffid::toy {

const std::vector<NamedColor>& palette() {
  static const std::vector<NamedColor> colors = {
      {"red", {0.8, -0.8, -0.8}},    {"green", {-0.8, 0.6, -0.8}},  {"blue", {-0.8, -0.6, 0.8}},
      {"yellow", {0.8, 0.7, -0.8}},  {"purple", {0.3, -0.8, 0.6}},  {"orange", {0.9, 0.1, -0.8}},
      {"cyan", {-0.8, 0.6, 0.7}},    {"white", {0.9, 0.9, 0.9}},    {"black", {-0.9, -0.9, -0.9}},
      {"gray", {0.0, 0.0, 0.0}},
  };
  return colors;
}

namespace {

double distance(const Rgb& a, const Rgb& b) {
  double d = 0.0;
  for (std::size_t c = 0; c < 3; ++c) d += (a[c] - b[c]) * (a[c] - b[c]);
  return std::sqrt(d);
}

// Chromatic entries only: gray, white and black can vanish against a gray background.
Rgb pick_color(Rng& rng, double background, bool chromatic_only) {
  const auto& colors = palette();
  const Rgb bg{background, background, background};
  for (;;) {
    const auto& c = colors[rng.index(colors.size())];
    const bool neutral = c.rgb[0] == c.rgb[1] && c.rgb[1] == c.rgb[2];
    if (chromatic_only && neutral) continue;
    if (distance(c.rgb, bg) > 0.8) return c.rgb;
  }
}

void paint(Image& img, std::size_t y0, std::size_t y1, std::size_t x0, std::size_t x1, const Rgb& rgb) {
  const auto& s = img.shape();
  y1 = std::min(y1, s.height);
  x1 = std::min(x1, s.width);
  for (std::size_t c = 0; c < s.channels; ++c) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = x0; x < x1; ++x) img.at(c, y, x) = rgb[std::min<std::size_t>(c, 2)];
    }
  }
}

struct Layout {
  std::size_t px0, px1, head_y0, head_y1, head_x0, head_x1, torso_y0, torso_y1, leg_y0, leg_y1, gap_x0, gap_x1,
      bag_y0, bag_x0, bag_x1;
};

Layout layout(ImageShape s) {
  Layout l{};
  const std::size_t h = s.height, w = s.width;
  l.px0 = w / 4;
  l.px1 = w - w / 4;
  l.head_y0 = h / 16;
  l.head_y1 = std::max(l.head_y0 + 1, h / 5);
  l.head_x0 = w * 3 / 8;
  l.head_x1 = std::max(l.head_x0 + 1, w * 5 / 8);
  l.torso_y0 = l.head_y1;
  l.torso_y1 = std::max(l.torso_y0 + 1, h * 11 / 20);
  l.leg_y0 = l.torso_y1;
  l.leg_y1 = std::max(l.leg_y0 + 1, h - h / 16);
  const std::size_t half_gap = std::max<std::size_t>(1, w / 16);
  l.gap_x0 = w / 2 - half_gap;
  l.gap_x1 = w / 2 + half_gap;
  l.bag_y0 = std::min(l.torso_y1 - 1, h * 7 / 20);
  l.bag_x0 = l.px1;
  l.bag_x1 = std::min(w, l.px1 + std::max<std::size_t>(1, w / 8));
  return l;
}

}  // namespace

std::string nearest_color_name(const Rgb& rgb) {
  const NamedColor* best = &palette().front();
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& c : palette()) {
    const double d = distance(c.rgb, rgb);
    if (d < best_d) {
      best_d = d;
      best = &c;
    }
  }
  return best->name;
}

SpriteIdentity random_identity(std::uint64_t seed) {
  Rng rng(seed);
  SpriteIdentity id;
  const double level = 0.25 + 0.45 * rng.uniform();
  id.background = rng.uniform() < 0.5 ? level : -level;
  id.shirt = pick_color(rng, id.background, false);
  id.pants = pick_color(rng, id.background, true);
  id.skin = {0.6, 0.2, -0.1};
  id.has_bag = rng.uniform() < 0.5;
  id.bag = pick_color(rng, id.background, true);
  id.walking = rng.uniform() < 0.5;
  return id;
}

Image render_sprite(const SpriteIdentity& identity, ImageShape shape, std::uint64_t frame_seed, double noise_stddev) {
  Rng rng(frame_seed);
  Image img(shape, identity.background);
  const Layout l = layout(shape);
  // Vertical jitter only; horizontal layout carries the leg-gap cue.
  long shift = 0;
  if (shape.height >= 16) shift = static_cast<long>(rng.index(3)) - 1;
  auto sh = [&](std::size_t y) {
    const long v = std::clamp(static_cast<long>(y) + shift, 0L, static_cast<long>(shape.height));
    return static_cast<std::size_t>(v);
  };

  paint(img, sh(l.head_y0), sh(l.head_y1), l.head_x0, l.head_x1, identity.skin);
  paint(img, sh(l.torso_y0), sh(l.torso_y1), l.px0, l.px1, identity.shirt);
  if (identity.walking) {
    paint(img, sh(l.leg_y0), sh(l.leg_y1), l.px0, l.gap_x0, identity.pants);
    paint(img, sh(l.leg_y0), sh(l.leg_y1), l.gap_x1, l.px1, identity.pants);
  } else {
    paint(img, sh(l.leg_y0), sh(l.leg_y1), l.px0, l.px1, identity.pants);
  }
  if (identity.has_bag) paint(img, sh(l.bag_y0), sh(l.torso_y1), l.bag_x0, l.bag_x1, identity.bag);

  if (noise_stddev > 0.0) {
    for (double& v : img.pixels()) v += noise_stddev * rng.normal();
  }
  clamp_pixels(img);
  return img;
}

Region torso_region(ImageShape shape) {
  const Layout l = layout(shape);
  const std::size_t y0 = l.torso_y1 - l.torso_y0 > 2 ? l.torso_y0 + 1 : l.torso_y0;
  const std::size_t y1 = l.torso_y1 - l.torso_y0 > 2 ? l.torso_y1 - 1 : l.torso_y1;
  return {y0, y1, l.px0 + 1, l.px1 - 1};
}

Region bag_region(ImageShape shape) {
  const Layout l = layout(shape);
  const std::size_t y0 = l.torso_y1 - l.bag_y0 > 2 ? l.bag_y0 + 1 : l.bag_y0;
  const std::size_t y1 = l.torso_y1 - l.bag_y0 > 2 ? l.torso_y1 - 1 : l.torso_y1;
  return {y0, y1, l.bag_x0, l.bag_x1};
}

Region leg_gap_region(ImageShape shape) {
  const Layout l = layout(shape);
  const std::size_t y0 = l.leg_y1 - l.leg_y0 > 2 ? l.leg_y0 + 1 : l.leg_y0;
  const std::size_t y1 = l.leg_y1 - l.leg_y0 > 2 ? l.leg_y1 - 1 : l.leg_y1;
  return {y0, y1, l.gap_x0, l.gap_x1};
}

Region background_region(ImageShape shape) {
  return {0, shape.height, 0, std::max<std::size_t>(1, shape.width / 8)};
}

Rgb region_mean(const Image& image, const Region& r) {
  Rgb out{0, 0, 0};
  const auto& s = image.shape();
  const std::size_t y1 = std::min(r.y1, s.height), x1 = std::min(r.x1, s.width);
  const double n = static_cast<double>((y1 - std::min(r.y0, y1)) * (x1 - std::min(r.x0, x1)));
  if (n == 0.0) return out;
  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t src_c = std::min(c, s.channels - 1);
    double sum = 0.0;
    for (std::size_t y = r.y0; y < y1; ++y) {
      for (std::size_t x = r.x0; x < x1; ++x) sum += image.at(src_c, y, x);
    }
    out[c] = sum / n;
  }
  return out;
}

}  // namespace diffid::toy
