#include "diffid/prompt/text_embedding.hpp"

#include <cctype>
#include <cmath>

#include "diffid/random.hpp"

namespace diffid::prompt {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) != 0) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::vector<double> embed_text(std::string_view text, std::size_t dim) {
  std::vector<double> out(dim, 0.0);
  for (const auto& token : tokenize(text)) {
    Rng rng(fnv1a(token));
    for (double& v : out) v += rng.normal();
  }
  double norm = 0.0;
  for (double v : out) norm += v * v;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& v : out) v /= norm;
  }
  return out;
}

}  // namespace diffid::prompt
