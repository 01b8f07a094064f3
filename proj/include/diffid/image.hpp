#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace diffid {

/// Channel-major image shape. The toy default keeps the 2:1 person aspect
/// ratio of a 256x128 crop at 1/8 scale.
struct ImageShape {
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 16;

  std::size_t size() const { return channels * height * width; }
  bool operator==(const ImageShape&) const = default;
};

std::string to_string(const ImageShape& shape);  // "CxHxW"

/// Dense real-valued image, pixels nominally in [-1, 1].
class Image {
 public:
  Image() = default;
  explicit Image(ImageShape shape, double fill = 0.0);
  Image(ImageShape shape, std::vector<double> pixels);

  const ImageShape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }

  std::span<double> pixels() { return data_; }
  std::span<const double> pixels() const { return data_; }

  bool operator==(const Image&) const = default;

 private:
  ImageShape shape_{0, 0, 0};
  std::vector<double> data_;
};

/// Bilinear resampling with half-pixel centers. An exact 2x downscale
/// averages each 2x2 block.
Image resize(const Image& image, std::size_t height, std::size_t width);

void clamp_pixels(Image& image, double lo = -1.0, double hi = 1.0);

// 8-bit binary PPM (P6) for 3-channel images, PGM (P5) for 1-channel.
// Pixels map [-1, 1] -> [0, 255].
void write_pnm(const std::string& path, const Image& image);
Image read_pnm(const std::string& path);

// Lossless encoding: shape followed by little-endian float64 pixels.
void encode_image(std::string& out, const Image& image);
Image decode_image(std::string_view bytes);

}  // namespace diffid
