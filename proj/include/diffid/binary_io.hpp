#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace diffid::binary {

// Little-endian encoders, independent of host byte order.
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f64(std::string& out, double v);
void put_string(std::string& out, std::string_view s);  // u64 length + bytes
void put_f64s(std::string& out, std::span<const double> values);  // u64 count + values

/// Bounds-checked cursor over an encoded buffer. Truncated input raises
/// IntegrityError.
class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string string();
  std::vector<double> f64s();
  std::string_view bytes(std::size_t n);

  bool done() const { return pos_ == data_.size(); }
  std::size_t position() const { return pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32(std::string_view bytes);

std::string read_file(const std::string& path);
/// Writes through a temporary sibling and renames, so readers never observe
/// a half-written file.
void write_file_atomic(const std::string& path, std::string_view bytes);

}  // namespace diffid::binary
