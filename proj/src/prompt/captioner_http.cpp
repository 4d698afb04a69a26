#include "railgen/prompt/captioner_http.hpp"

#include <httplib.h>
#include <json.hpp>

#include "railgen/core/error.hpp"
#include "railgen/io/image_io.hpp"

namespace railgen::prompt {

std::string base64_encode(const unsigned char* data, size_t n) {
  static const char* alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve(((n + 2) / 3) * 4);
  size_t i = 0;
  for (; i + 2 < n; i += 3) {
    uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out.push_back(alphabet[(v >> 18) & 0x3f]);
    out.push_back(alphabet[(v >> 12) & 0x3f]);
    out.push_back(alphabet[(v >> 6) & 0x3f]);
    out.push_back(alphabet[v & 0x3f]);
  }
  if (i + 1 == n) {
    uint32_t v = data[i] << 16;
    out.push_back(alphabet[(v >> 18) & 0x3f]);
    out.push_back(alphabet[(v >> 12) & 0x3f]);
    out += "==";
  } else if (i + 2 == n) {
    uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
    out.push_back(alphabet[(v >> 18) & 0x3f]);
    out.push_back(alphabet[(v >> 12) & 0x3f]);
    out.push_back(alphabet[(v >> 6) & 0x3f]);
    out += "=";
  }
  return out;
}

HttpCaptioner::HttpCaptioner(std::string base_url, int max_length,
                             int timeout_seconds)
    : base_url_(std::move(base_url)), max_length_(max_length),
      timeout_seconds_(timeout_seconds) {}

std::string HttpCaptioner::caption(const data::ScenePair& pair) {
  std::vector<unsigned char> png = io::encode_png(pair.image);

  nlohmann::json req;
  req["image_b64"] = base64_encode(png.data(), png.size());
  req["max_length"] = max_length_;

  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_seconds_, 0);
  client.set_read_timeout(timeout_seconds_, 0);

  auto res = client.Post("/caption", req.dump(), "application/json");
  if (!res)
    fail("CaptionerUnavailable",
         "no response from captioner at " + base_url_);
  if (res->status != 200)
    fail("CaptionerUnavailable",
         "captioner returned status " + std::to_string(res->status));

  nlohmann::json body;
  try {
    body = nlohmann::json::parse(res->body);
  } catch (const std::exception&) {
    fail("CaptionerUnavailable", "captioner response is not valid JSON");
  }
  if (!body.contains("caption") || !body["caption"].is_string() ||
      body["caption"].get<std::string>().empty())
    fail("CaptionerUnavailable", "captioner response has no caption");
  if (body.contains("model") && body["model"].is_string())
    model_id_ = body["model"].get<std::string>();
  return body["caption"].get<std::string>();
}

} // namespace railgen::prompt
