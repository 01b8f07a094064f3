#include "diffid/checkpoint.hpp"

#include "diffid/binary_io.hpp"
#include "diffid/errors.hpp"

namespace diffid {
namespace {
constexpr std::string_view kMagic = "DIFFIDCK";
}

const std::string& Checkpoint::require(const std::string& key) const {
  auto it = config.find(key);
  if (it == config.end()) throw IntegrityError("checkpoint (" + kind + ") is missing config key '" + key + "'");
  return it->second;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic);
  binary::put_u32(out, Checkpoint::kVersion);
  binary::put_string(out, ckpt.kind);
  binary::put_u64(out, ckpt.config.size());
  for (const auto& [k, v] : ckpt.config) {
    binary::put_string(out, k);
    binary::put_string(out, v);
  }
  binary::put_f64s(out, ckpt.parameters);
  binary::put_u32(out, binary::crc32(out));
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 4 || bytes.substr(0, kMagic.size()) != kMagic) {
    throw IntegrityError("not a diffid checkpoint");
  }
  const auto body = bytes.substr(0, bytes.size() - 4);
  binary::Reader tail(bytes.substr(bytes.size() - 4));
  if (tail.u32() != binary::crc32(body)) throw IntegrityError("checkpoint checksum mismatch");

  binary::Reader r(body.substr(kMagic.size()));
  const auto version = r.u32();
  if (version != Checkpoint::kVersion) {
    throw IntegrityError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.kind = r.string();
  const auto n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    auto k = r.string();
    ckpt.config[std::move(k)] = r.string();
  }
  ckpt.parameters = r.f64s();
  if (!r.done()) throw IntegrityError("trailing bytes in checkpoint");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  binary::write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(binary::read_file(path)); }

}  // namespace diffid
