#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace diffid::prompt {

/// Lower-cased alphanumeric tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Stand-in for a text encoder: each token hashes to a fixed pseudo-random
/// Gaussian vector, the prompt embedding is the unit-normalized sum. Adding
/// or removing a token (such as an identity token) always moves the result.
/// An empty prompt embeds to the zero vector.
std::vector<double> embed_text(std::string_view text, std::size_t dim);

}  // namespace diffid::prompt
