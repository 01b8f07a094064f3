#include "diffid/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "diffid/binary_io.hpp"
#include "diffid/errors.hpp"

namespace diffid {

std::string to_string(const ImageShape& shape) {
  return std::to_string(shape.channels) + "x" + std::to_string(shape.height) + "x" +
         std::to_string(shape.width);
}

Image::Image(ImageShape shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Image::Image(ImageShape shape, std::vector<double> pixels) : shape_(shape), data_(std::move(pixels)) {
  if (data_.size() != shape_.size()) {
    throw std::invalid_argument("pixel count " + std::to_string(data_.size()) + " does not match shape " +
                                to_string(shape_));
  }
}

Image resize(const Image& image, std::size_t height, std::size_t width) {
  const auto& s = image.shape();
  if (height == 0 || width == 0) throw std::invalid_argument("resize: target size must be positive");
  if (s.height == height && s.width == width) return image;
  Image out({s.channels, height, width});
  const double sy = static_cast<double>(s.height) / static_cast<double>(height);
  const double sx = static_cast<double>(s.width) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(s.height - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, s.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(s.width - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, s.width - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < s.channels; ++c) {
        const double top = image.at(c, y0, x0) * (1 - wx) + image.at(c, y0, x1) * wx;
        const double bot = image.at(c, y1, x0) * (1 - wx) + image.at(c, y1, x1) * wx;
        out.at(c, y, x) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return out;
}

void clamp_pixels(Image& image, double lo, double hi) {
  for (double& v : image.pixels()) v = std::clamp(v, lo, hi);
}

void write_pnm(const std::string& path, const Image& image) {
  const auto& s = image.shape();
  if (s.channels != 1 && s.channels != 3) {
    throw std::invalid_argument("write_pnm: only 1- or 3-channel images, got " + to_string(s));
  }
  std::string buf = (s.channels == 3 ? "P6\n" : "P5\n") + std::to_string(s.width) + " " +
                    std::to_string(s.height) + "\n255\n";
  buf.reserve(buf.size() + s.size());
  for (std::size_t y = 0; y < s.height; ++y) {
    for (std::size_t x = 0; x < s.width; ++x) {
      for (std::size_t c = 0; c < s.channels; ++c) {
        const double v = std::clamp(image.at(c, y, x), -1.0, 1.0);
        buf.push_back(static_cast<char>(static_cast<unsigned char>(std::lround((v + 1.0) * 127.5))));
      }
    }
  }
  binary::write_file_atomic(path, buf);
}

Image read_pnm(const std::string& path) {
  const std::string data = binary::read_file(path);
  std::istringstream in(data);
  std::string magic;
  std::size_t width = 0, height = 0, maxval = 0;
  in >> magic;
  auto skip_comments = [&] {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string line;
      std::getline(in, line);
      in >> std::ws;
    }
  };
  skip_comments();
  in >> width;
  skip_comments();
  in >> height;
  skip_comments();
  in >> maxval;
  if (!in || (magic != "P6" && magic != "P5") || maxval != 255 || width == 0 || height == 0) {
    throw IntegrityError("unsupported or malformed PNM header in " + path);
  }
  in.get();  // single whitespace after maxval
  const std::size_t channels = magic == "P6" ? 3 : 1;
  const auto offset = static_cast<std::size_t>(in.tellg());
  if (data.size() < offset + channels * width * height) throw IntegrityError("truncated PNM payload in " + path);
  Image out({channels, height, width});
  std::size_t i = offset;
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        out.at(c, y, x) = static_cast<double>(static_cast<unsigned char>(data[i++])) / 127.5 - 1.0;
      }
    }
  }
  return out;
}

void encode_image(std::string& out, const Image& image) {
  const auto& s = image.shape();
  binary::put_u64(out, s.channels);
  binary::put_u64(out, s.height);
  binary::put_u64(out, s.width);
  for (double v : image.pixels()) binary::put_f64(out, v);
}

Image decode_image(std::string_view bytes) {
  binary::Reader r(bytes);
  ImageShape s;
  s.channels = r.u64();
  s.height = r.u64();
  s.width = r.u64();
  if (s.channels == 0 || s.height == 0 || s.width == 0 || s.size() * 8 != bytes.size() - r.position()) {
    throw IntegrityError("image payload does not match its header");
  }
  std::vector<double> px(s.size());
  for (auto& v : px) v = r.f64();
  return Image(s, std::move(px));
}

}  // namespace diffid
