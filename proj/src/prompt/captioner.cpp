#include "diffid/prompt/captioner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string_view>

#include "diffid/errors.hpp"
#include "diffid/toy/sprites.hpp"

namespace diffid::prompt {

std::string to_string(AttributeSlot slot) {
  switch (slot) {
    case AttributeSlot::clothing: return "clothing";
    case AttributeSlot::carried_items: return "carried_items";
    case AttributeSlot::action: return "action";
    case AttributeSlot::scene: return "scene";
  }
  return "unknown";
}

AttributeSlot parse_attribute_slot(const std::string& name) {
  for (auto slot : {AttributeSlot::clothing, AttributeSlot::carried_items, AttributeSlot::action, AttributeSlot::scene}) {
    if (to_string(slot) == name) return slot;
  }
  throw std::invalid_argument("unknown attribute slot '" + name + "'");
}

namespace {

constexpr double kContrast = 0.35;

double distance(const toy::Rgb& a, const toy::Rgb& b) {
  double d = 0.0;
  for (std::size_t c = 0; c < 3; ++c) d += (a[c] - b[c]) * (a[c] - b[c]);
  return std::sqrt(d);
}

}  // namespace

StubCaptioner::StubCaptioner(CaptionerHandle handle) : handle_(std::move(handle)) {
  if (handle_.name.empty()) throw std::invalid_argument("captioner name must be non-empty");
}

SlotValues StubCaptioner::describe(const Image& image) const {
  const auto shape = image.shape();
  const auto bg = toy::region_mean(image, toy::background_region(shape));
  SlotValues slots;
  slots[AttributeSlot::clothing] = toy::nearest_color_name(toy::region_mean(image, toy::torso_region(shape))) + " clothes";
  const auto bag = toy::region_mean(image, toy::bag_region(shape));
  const auto bag_color = toy::nearest_color_name(bag);
  const char* article = std::string_view("aeiou").find(bag_color.front()) == std::string_view::npos ? "a " : "an ";
  slots[AttributeSlot::carried_items] = distance(bag, bg) > kContrast ? article + bag_color + " bag" : "nothing";
  const auto gap = toy::region_mean(image, toy::leg_gap_region(shape));
  slots[AttributeSlot::action] = distance(gap, bg) < kContrast ? "walking" : "standing";
  const double brightness = (bg[0] + bg[1] + bg[2]) / 3.0;
  slots[AttributeSlot::scene] = brightness > 0.0 ? "outdoors" : "indoors";
  return slots;
}

std::string StubCaptioner::render(const SlotValues& slots) const {
  std::string out;
  for (auto slot : handle_.attribute_focus) {
    auto it = slots.find(slot);
    if (it == slots.end()) continue;
    std::string phrase;
    switch (slot) {
      case AttributeSlot::clothing: phrase = "wearing " + it->second; break;
      case AttributeSlot::carried_items: phrase = "carrying " + it->second; break;
      case AttributeSlot::action: phrase = it->second; break;
      case AttributeSlot::scene: phrase = it->second; break;
    }
    if (!out.empty()) out += ", ";
    out += phrase;
  }
  return out;
}

std::string StubCaptioner::caption(std::span<const Image> images) const {
  std::vector<SlotValues> per_image;
  per_image.reserve(images.size());
  for (const auto& img : images) per_image.push_back(describe(img));

  SlotValues majority;
  for (auto slot : handle_.attribute_focus) {
    // Insertion-ordered tally so ties resolve to the earliest value.
    std::vector<std::pair<std::string, int>> tally;
    for (const auto& values : per_image) {
      const auto& v = values.at(slot);
      auto it = std::find_if(tally.begin(), tally.end(), [&](const auto& e) { return e.first == v; });
      if (it == tally.end()) {
        tally.emplace_back(v, 1);
      } else {
        ++it->second;
      }
    }
    if (tally.empty()) continue;
    auto best = tally.begin();
    for (auto it = tally.begin(); it != tally.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    majority[slot] = best->first;
  }
  return render(majority);
}

ExternalCaptioner::ExternalCaptioner(std::string name, Transport transport)
    : name_(std::move(name)), transport_(std::move(transport)) {
  if (name_.empty()) throw std::invalid_argument("captioner name must be non-empty");
}

std::string ExternalCaptioner::caption(std::span<const Image> images) const {
  if (!transport_) throw BackendError(name_, "no transport configured");
  std::vector<std::string> payload;
  payload.reserve(images.size());
  for (const auto& img : images) {
    std::string bytes;
    encode_image(bytes, img);
    payload.push_back(std::move(bytes));
  }
  try {
    return transport_(payload);
  } catch (const BackendError&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendError(name_, e.what());
  }
}

std::string caption_sequence(std::span<const Image> images, const Captioner& captioner) {
  if (images.empty()) throw std::invalid_argument("caption_sequence: empty image sequence");
  return captioner.caption(images);
}

CaptionerRegistry::CaptionerRegistry() { add(std::make_shared<StubCaptioner>()); }

void CaptionerRegistry::add(std::shared_ptr<const Captioner> captioner) {
  captioners_[captioner->name()] = std::move(captioner);
}

std::shared_ptr<const Captioner> CaptionerRegistry::get(const std::string& name) const {
  auto it = captioners_.find(name);
  if (it == captioners_.end()) throw BackendError(name, "no captioner adapter registered under this name");
  return it->second;
}

}  // namespace diffid::prompt
