#pragma once

#include <string>

#include "railgen/prompt/prompt.hpp"

namespace railgen::prompt {

// Client for an external captioning service speaking a single JSON
// endpoint: POST /caption with {"image_b64": <base64 PNG>, "max_length": N}
// answered by {"caption": "...", "model": "..."}. Any transport or
// protocol failure surfaces as CaptionerUnavailable.
class HttpCaptioner : public Captioner {
public:
  explicit HttpCaptioner(std::string base_url, int max_length = 64,
                         int timeout_seconds = 10);

  std::string caption(const data::ScenePair& pair) override;
  std::string model_id() const override { return model_id_; }

private:
  std::string base_url_;
  int max_length_;
  int timeout_seconds_;
  std::string model_id_ = "remote-captioner";
};

std::string base64_encode(const unsigned char* data, size_t n);

} // namespace railgen::prompt
