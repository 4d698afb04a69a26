#include "railgen/prompt/prompt.hpp"

#include <algorithm>
#include <map>

#include "railgen/core/error.hpp"

namespace railgen::prompt {

std::string regime_name(Regime r) {
  switch (r) {
  case Regime::None:
    return "none";
  case Regime::Fixed:
    return "fixed";
  case Regime::Captioned:
    return "caption";
  }
  fail("InvalidArgument", "invalid prompt regime");
}

Regime regime_from_name(const std::string& name) {
  if (name == "none")
    return Regime::None;
  if (name == "fixed")
    return Regime::Fixed;
  if (name == "caption")
    return Regime::Captioned;
  fail("InvalidArgument", "unknown prompt regime '" + name + "'");
}

std::vector<std::string> default_negatives() {
  return {"low quality-image", "bad anatomy", "unrealistic rails"};
}

std::string decorate(const std::string& prompt, const std::string& decorator) {
  if (decorator.empty())
    fail("InvalidArgument", "decorator must be non-empty");
  if (prompt.empty())
    return decorator;
  return prompt + ", " + decorator;
}

std::string StubCaptioner::caption(const data::ScenePair& pair) {
  return stub_caption(pair.mask, table_, rail_id_);
}

std::string stub_caption(const ImageU8& mask, const data::ClassTable& table,
                         int rail_id, int background_id) {
  std::map<int, size_t> counts;
  for (uint8_t id : mask.px)
    ++counts[id];

  if (counts.find(rail_id) == counts.end())
    return "a scene";

  // top non-rail, non-background classes by pixel count; ties break on the
  // smaller class id so output is deterministic
  std::vector<std::pair<int, size_t>> others;
  for (const auto& [id, n] : counts)
    if (id != rail_id && id != background_id)
      others.emplace_back(id, n);
  std::sort(others.begin(), others.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second)
      return a.second > b.second;
    return a.first < b.first;
  });
  if (others.size() > 2)
    others.resize(2);

  std::string text = "a railway track";
  if (!others.empty()) {
    text += " with ";
    for (size_t i = 0; i < others.size(); ++i) {
      if (i > 0)
        text += " and ";
      text += table.name(others[i].first) + "s";
    }
  }
  return text;
}

PromptBundle build_prompt_bundle(const data::ScenePair& pair, Regime regime,
                                 bool negatives_on, Captioner* captioner,
                                 const PromptOptions& opts) {
  PromptBundle bundle;
  bundle.regime = regime;
  bundle.negatives_on = negatives_on;
  bundle.decorator = opts.decorator;

  std::string core;
  switch (regime) {
  case Regime::None:
    core = "";
    break;
  case Regime::Fixed:
    core = opts.fixed_text;
    break;
  case Regime::Captioned: {
    if (!captioner)
      fail("CaptionerUnavailable", "captioned regime requires a captioner");
    std::string caption;
    try {
      caption = captioner->caption(pair);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      fail("CaptionerUnavailable", e.what());
    }
    if (caption.empty())
      fail("CaptionerUnavailable", "captioner returned an empty caption");
    core = caption;
    bundle.captioner_model = captioner->model_id();
    break;
  }
  }

  bundle.positive = opts.decorator.empty() ? core : decorate(core, opts.decorator);

  if (negatives_on) {
    std::string neg;
    for (size_t i = 0; i < opts.negatives.size(); ++i) {
      if (i > 0)
        neg += ", ";
      neg += opts.negatives[i];
    }
    bundle.negative = neg;
  }
  return bundle;
}

} // namespace railgen::prompt
