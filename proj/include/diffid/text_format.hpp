#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

namespace diffid {

/// Shortest decimal form that reads back to the same double.
inline std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Whole-string parse; false on any trailing garbage.
template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool parse_bool(std::string_view s, bool& out);

/// Splits on `sep`, trimming blanks and dropping empty pieces.
std::vector<std::string> split_list(std::string_view s, char sep = ',');

}  // namespace diffid
