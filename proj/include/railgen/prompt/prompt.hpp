#pragma once

#include <string>
#include <vector>

#include "railgen/data/dataset.hpp"

namespace railgen::prompt {

enum class Regime { None, Fixed, Captioned };

std::string regime_name(Regime r);
Regime regime_from_name(const std::string& name);

// quality decorators; the longer form is the experimental default
inline constexpr const char* kDecoratorDefault =
    "high quality, extremely detailed, 4K, HQ";
inline constexpr const char* kDecoratorShort =
    "high quality, extremely detailed, 4K";

std::vector<std::string> default_negatives();

struct PromptBundle {
  std::string positive;
  std::string negative; // empty iff negatives are off
  Regime regime = Regime::None;
  bool negatives_on = false;
  std::string decorator;
  std::string captioner_model; // set when regime == Captioned
};

// "" -> decorator; otherwise prompt + ", " + decorator. Not idempotent:
// applying twice embeds the decorator twice.
std::string decorate(const std::string& prompt, const std::string& decorator);

class Captioner {
public:
  virtual ~Captioner() = default;
  virtual std::string caption(const data::ScenePair& pair) = 0;
  virtual std::string model_id() const = 0;
};

// Deterministic offline captioner: describes the mask content with
// stub_caption below.
class StubCaptioner : public Captioner {
public:
  StubCaptioner(data::ClassTable table, int rail_id)
      : table_(std::move(table)), rail_id_(rail_id) {}
  std::string caption(const data::ScenePair& pair) override;
  std::string model_id() const override { return "stub-captioner-v1"; }

private:
  data::ClassTable table_;
  int rail_id_;
};

// "a railway track with <top two non-rail, non-background classes,
// pluralized, joined by ' and '>"; "a scene" when the mask has no rail.
std::string stub_caption(const ImageU8& mask, const data::ClassTable& table,
                         int rail_id, int background_id = 0);

struct PromptOptions {
  std::string fixed_text = "a railway scene";
  std::string decorator = kDecoratorDefault; // empty string disables decoration
  std::vector<std::string> negatives = default_negatives();
};

PromptBundle build_prompt_bundle(const data::ScenePair& pair, Regime regime,
                                 bool negatives_on, Captioner* captioner,
                                 const PromptOptions& opts);

} // namespace railgen::prompt
