#include "diffid/text_format.hpp"

namespace diffid {

bool parse_bool(std::string_view s, bool& out) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no" || s == "off") {
    out = false;
    return true;
  }
  return false;
}

std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(sep, start);
    if (end == std::string_view::npos) end = s.size();
    auto piece = s.substr(start, end - start);
    const auto b = piece.find_first_not_of(" \t");
    if (b != std::string_view::npos) {
      const auto e = piece.find_last_not_of(" \t");
      out.emplace_back(piece.substr(b, e - b + 1));
    }
    start = end + 1;
  }
  return out;
}

}  // namespace diffid
