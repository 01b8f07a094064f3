#pragma once

#include <cstdint>
#include <mutex>
#include <set>
#include <string>
#include <vector>

namespace diffid::prompt {

/// 10,000 pronounceable 3-4 letter strings (consonant-vowel-consonant
/// followed by consonant-vowel-consonant-vowel), generated in a fixed order.
const std::vector<std::string>& default_iir_candidates();

/// Built-in stand-in for a text encoder vocabulary: the words the stub
/// captioner and the default template produce plus common short English
/// words.
const std::set<std::string>& default_vocabulary();

/// One token per line; blank lines and '#' comments are skipped.
std::vector<std::string> parse_token_list(const std::string& text);

/// First candidate, in a seeded shuffle of `candidates`, that is absent from
/// `vocabulary`. Throws ExhaustionError when every candidate is known.
std::string allocate_iir(const std::set<std::string>& vocabulary, const std::vector<std::string>& candidates,
                         std::uint64_t seed);

/// Run-wide record of identity tokens already handed out. allocate() treats
/// used tokens as vocabulary, so no token is returned twice.
class IirRegistry {
 public:
  std::string allocate(const std::set<std::string>& vocabulary, const std::vector<std::string>& candidates,
                       std::uint64_t seed);
  /// Marks a token as used (e.g. when resuming from a cached prompt).
  /// Returns false if it was already claimed.
  bool claim(const std::string& token);
  std::set<std::string> used() const;

 private:
  mutable std::mutex mutex_;
  std::set<std::string> used_;
};

}  // namespace diffid::prompt
