#include "diffid/prompt/prompts.hpp"

#include <algorithm>
#include <stdexcept>

#include "diffid/prompt/text_embedding.hpp"

namespace diffid::prompt {
namespace {

std::size_t count_substr(const std::string& text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + needle.size())) ++n;
  return n;
}

// Fills both slots by their positions in the template, so slot-like text
// inside the caption is never substituted.
std::string fill(const std::string& tmpl, const std::string& identity, const std::string& caption) {
  const auto id_pos = tmpl.find(kIdentitySlot);
  const auto cap_pos = tmpl.find(kCaptionSlot);
  if (id_pos < cap_pos) {
    return tmpl.substr(0, id_pos) + identity + tmpl.substr(id_pos + kIdentitySlot.size(), cap_pos - id_pos - kIdentitySlot.size()) +
           caption + tmpl.substr(cap_pos + kCaptionSlot.size());
  }
  return tmpl.substr(0, cap_pos) + caption + tmpl.substr(cap_pos + kCaptionSlot.size(), id_pos - cap_pos - kCaptionSlot.size()) +
         identity + tmpl.substr(id_pos + kIdentitySlot.size());
}

}  // namespace

std::size_t count_token(const std::string& text, const std::string& token) {
  const auto tokens = tokenize(text);
  const auto normalized = tokenize(token);
  if (normalized.size() != 1) return 0;
  return static_cast<std::size_t>(std::count(tokens.begin(), tokens.end(), normalized.front()));
}

PromptBundle build_prompts(const std::string& caption, const std::string& iir, const std::string& prompt_template) {
  const auto identity_slots = count_substr(prompt_template, kIdentitySlot);
  const auto caption_slots = count_substr(prompt_template, kCaptionSlot);
  if (identity_slots != 1 || caption_slots != 1) {
    throw std::invalid_argument("prompt template needs exactly one " + std::string(kIdentitySlot) + " and one " +
                                std::string(kCaptionSlot) + " slot, found " + std::to_string(identity_slots) +
                                " and " + std::to_string(caption_slots));
  }
  if (tokenize(iir).size() != 1 || tokenize(iir).front() != iir) {
    throw std::invalid_argument("identity token '" + iir + "' must be a single lower-case alphanumeric word");
  }
  PromptBundle b;
  b.caption = caption;
  b.iir_token = iir;
  b.enhanced_prompt = fill(prompt_template, iir + " person", caption);
  b.lpe_prompt = fill(prompt_template, "person", caption);
  if (!bundle_is_valid(b)) {
    throw std::invalid_argument("identity token '" + iir + "' also occurs in the caption or template");
  }
  return b;
}

bool bundle_is_valid(const PromptBundle& b) {
  if (count_token(b.enhanced_prompt, b.iir_token) != 1) return false;
  if (count_token(b.lpe_prompt, b.iir_token) != 0) return false;
  const std::string needle = b.iir_token + " ";
  const auto pos = b.enhanced_prompt.find(needle + "person");
  if (pos == std::string::npos) return false;
  std::string removed = b.enhanced_prompt;
  removed.erase(pos, needle.size());
  return removed == b.lpe_prompt;
}

}  // namespace diffid::prompt
