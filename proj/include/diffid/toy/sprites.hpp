#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "diffid/image.hpp"

namespace diffid::toy {

using Rgb = std::array<double, 3>;  // each channel in [-1, 1]

struct NamedColor {
  const char* name;
  Rgb rgb;
};

/// The palette sprites are painted from and the stub captioner names.
const std::vector<NamedColor>& palette();
/// Name of the palette entry nearest to `rgb` in Euclidean distance.
std::string nearest_color_name(const Rgb& rgb);

/// Appearance of one synthetic pedestrian.
struct SpriteIdentity {
  Rgb shirt{};
  Rgb pants{};
  Rgb skin{};
  bool has_bag = false;
  Rgb bag{};
  bool walking = false;
  double background = 0.0;  // gray level; > 0 reads as outdoors
};

SpriteIdentity random_identity(std::uint64_t seed);

/// One frame of a sprite sequence. `frame_seed` drives a +-1 pixel jitter and
/// low-amplitude pixel noise so frames differ while the identity stays fixed.
Image render_sprite(const SpriteIdentity& identity, ImageShape shape, std::uint64_t frame_seed,
                    double noise_stddev = 0.03);

// Body regions as [begin, end) row/column ranges for a given shape. Shared by
// the renderer and the stub captioner.
struct Region {
  std::size_t y0, y1, x0, x1;
};
Region torso_region(ImageShape shape);
Region bag_region(ImageShape shape);
Region leg_gap_region(ImageShape shape);
Region background_region(ImageShape shape);

Rgb region_mean(const Image& image, const Region& region);

}  // namespace diffid::toy
