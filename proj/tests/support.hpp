#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "diffid/image.hpp"
#include "diffid/random.hpp"

namespace test_support {

/// Fresh, empty scratch directory for one test case.
inline std::string scratch_dir(const std::string& name) {
  const char* root = std::getenv("DIFFID_TEST_TMP");
  auto dir = std::filesystem::path(root ? root : "/tmp/diffid-tests") / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

inline diffid::Image random_image(diffid::ImageShape shape, std::uint64_t seed, double stddev = 0.5) {
  diffid::Image img(shape);
  diffid::Rng rng(seed);
  rng.fill_normal(img.pixels(), stddev);
  return img;
}

}  // namespace test_support
