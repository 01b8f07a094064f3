#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "diffid/image.hpp"

namespace diffid::prompt {

enum class AttributeSlot { clothing, carried_items, action, scene };

std::string to_string(AttributeSlot slot);
AttributeSlot parse_attribute_slot(const std::string& name);

struct CaptionerHandle {
  std::string name = "stub";
  std::vector<AttributeSlot> attribute_focus = {AttributeSlot::clothing, AttributeSlot::carried_items,
                                                AttributeSlot::action, AttributeSlot::scene};
};

/// Image-sequence captioner. Adapters for external vision-language models
/// implement the same interface.
class Captioner {
 public:
  virtual ~Captioner() = default;
  virtual const std::string& name() const = 0;
  virtual std::string caption(std::span<const Image> images) const = 0;
};

using SlotValues = std::map<AttributeSlot, std::string>;

/// Deterministic captioner driven by sprite image statistics. Each image
/// yields one value per attribute slot; a sequence caption takes the
/// per-slot majority (ties go to the value seen first) and renders the
/// slots in focus order.
class StubCaptioner final : public Captioner {
 public:
  explicit StubCaptioner(CaptionerHandle handle = {});

  const std::string& name() const override { return handle_.name; }
  std::string caption(std::span<const Image> images) const override;

  SlotValues describe(const Image& image) const;
  std::string render(const SlotValues& slots) const;

 private:
  CaptionerHandle handle_;
};

/// Adapter for an out-of-process captioner: images are handed over as
/// losslessly encoded bytes (see encode_image) and the transport returns
/// UTF-8 text. Transport failures surface as BackendError tagged with the
/// adapter name.
class ExternalCaptioner final : public Captioner {
 public:
  using Transport = std::function<std::string(const std::vector<std::string>& image_bytes)>;

  ExternalCaptioner(std::string name, Transport transport);

  const std::string& name() const override { return name_; }
  std::string caption(std::span<const Image> images) const override;

 private:
  std::string name_;
  Transport transport_;
};

/// Validates the sequence and forwards to the captioner.
std::string caption_sequence(std::span<const Image> images, const Captioner& captioner);

/// Name -> captioner lookup used by the pipeline configuration. "stub" is
/// always present.
class CaptionerRegistry {
 public:
  CaptionerRegistry();

  void add(std::shared_ptr<const Captioner> captioner);
  /// Unknown names raise BackendError.
  std::shared_ptr<const Captioner> get(const std::string& name) const;

 private:
  std::map<std::string, std::shared_ptr<const Captioner>> captioners_;
};

}  // namespace diffid::prompt
