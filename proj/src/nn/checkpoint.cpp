#include "railgen/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "railgen/core/error.hpp"
#include "railgen/core/hash.hpp"

namespace railgen::nn {

namespace {

constexpr char kMagic[] = "RGCKPT1\n";

void write_u64(std::ostream& os, uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
  return v;
}

nlohmann::json header_json(const std::vector<ParamGroup>& groups,
                           const nlohmann::json& meta) {
  nlohmann::json h;
  h["groups"] = nlohmann::json::array();
  for (const auto& g : groups) {
    nlohmann::json gj;
    gj["name"] = g.name;
    gj["frozen"] = g.frozen;
    gj["params"] = nlohmann::json::array();
    for (const auto& p : g.params)
      gj["params"].push_back({{"name", p.name}, {"size", p.size}});
    h["groups"].push_back(gj);
  }
  h["meta"] = meta;
  h["content_hash"] = to_hex(content_hash(groups));
  return h;
}

std::pair<nlohmann::json, std::streampos> read_header(std::ifstream& is,
                                                      const std::string& path) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    fail("IoError", "not a checkpoint file: " + path);
  uint64_t hlen = read_u64(is);
  std::string hdr(hlen, '\0');
  is.read(hdr.data(), static_cast<std::streamsize>(hlen));
  if (!is) fail("IoError", "truncated checkpoint header: " + path);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(hdr);
  } catch (const std::exception&) {
    fail("IoError", "corrupt checkpoint header: " + path);
  }
  return {h, is.tellg()};
}

} // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<ParamGroup>& groups,
                     const nlohmann::json& meta) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail("IoError", "cannot write checkpoint: " + path);
  std::string hdr = header_json(groups, meta).dump();
  os.write(kMagic, 8);
  write_u64(os, hdr.size());
  os.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
  for (const auto& g : groups)
    for (const auto& p : g.params)
      os.write(reinterpret_cast<const char*>(p.value),
               static_cast<std::streamsize>(p.size * sizeof(float)));
  if (!os) fail("IoError", "short write on checkpoint: " + path);
}

nlohmann::json load_checkpoint(const std::string& path,
                               std::vector<ParamGroup>& groups) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("IoError", "cannot open checkpoint: " + path);
  auto [h, pos] = read_header(is, path);

  const auto& gj = h["groups"];
  if (gj.size() != groups.size())
    fail("IoError", "checkpoint group count mismatch: " + path);
  for (size_t i = 0; i < groups.size(); ++i) {
    auto& g = groups[i];
    if (gj[i]["name"].get<std::string>() != g.name)
      fail("IoError", "checkpoint group order mismatch at " + g.name);
    const auto& pj = gj[i]["params"];
    if (pj.size() != g.params.size())
      fail("IoError", "checkpoint param count mismatch in " + g.name);
    for (size_t k = 0; k < g.params.size(); ++k) {
      if (pj[k]["name"].get<std::string>() != g.params[k].name ||
          pj[k]["size"].get<size_t>() != g.params[k].size)
        fail("IoError",
             "checkpoint param mismatch at " + g.params[k].name);
    }
    g.frozen = gj[i]["frozen"].get<bool>();
  }
  for (auto& g : groups)
    for (auto& p : g.params) {
      is.read(reinterpret_cast<char*>(p.value),
              static_cast<std::streamsize>(p.size * sizeof(float)));
      if (!is) fail("IoError", "truncated checkpoint blobs: " + path);
    }
  std::string stored = h["content_hash"].get<std::string>();
  if (to_hex(content_hash(groups)) != stored)
    fail("IoError", "checkpoint content hash mismatch: " + path);
  return h["meta"];
}

nlohmann::json read_checkpoint_meta(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("IoError", "cannot open checkpoint: " + path);
  auto [h, pos] = read_header(is, path);
  return h;
}

} // namespace railgen::nn
