#pragma once

#include <string>

namespace diffid::prompt {

inline constexpr std::string_view kIdentitySlot = "{identity}";
inline constexpr std::string_view kCaptionSlot = "{caption}";
inline constexpr std::string_view kDefaultTemplate = "a photo of {identity}, {caption}";

/// caption: captioner output. enhanced_prompt: template filled with
/// "<iir> person". lpe_prompt: the same template filled with "person", i.e.
/// the enhanced prompt with the identity token removed.
struct PromptBundle {
  std::string caption;
  std::string iir_token;
  std::string enhanced_prompt;
  std::string lpe_prompt;

  bool operator==(const PromptBundle&) const = default;
};

/// Throws std::invalid_argument when the template does not hold exactly one
/// of each slot, or when the result would not carry the identity token
/// exactly once as a whole word.
PromptBundle build_prompts(const std::string& caption, const std::string& iir,
                           const std::string& prompt_template = std::string(kDefaultTemplate));

/// Whole-word occurrences of `token` in `text` (tokenized as in embed_text).
std::size_t count_token(const std::string& text, const std::string& token);

/// All PromptBundle invariants.
bool bundle_is_valid(const PromptBundle& bundle);

}  // namespace diffid::prompt
