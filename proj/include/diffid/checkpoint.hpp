#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace diffid {

/// Flat parameter vector plus string-keyed config. Shared by the toy
/// denoiser and the re-identification backbone.
///
/// Encoding (all integers and floats little-endian):
///   "DIFFIDCK" | u32 version | string kind | u64 n_entries
///   | n x (string key, string value) | u64 n_params | n x f64 | u32 crc32
/// Strings are a u64 byte length followed by the bytes. The trailing CRC
/// covers every preceding byte.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string kind;
  std::map<std::string, std::string> config;
  std::vector<double> parameters;

  bool operator==(const Checkpoint&) const = default;

  const std::string& require(const std::string& key) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace diffid
