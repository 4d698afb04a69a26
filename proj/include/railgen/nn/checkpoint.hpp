#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "railgen/nn/params.hpp"

namespace railgen::nn {

// Checkpoint layout: magic line, length-prefixed JSON header (group names,
// frozen flags, param names/sizes, caller metadata, content hash), then the
// raw float32 blobs in header order.
void save_checkpoint(const std::string& path,
                     const std::vector<ParamGroup>& groups,
                     const nlohmann::json& meta);

// Copies blobs into an already-constructed model whose groups must match
// the header by name and size. Returns the caller metadata.
nlohmann::json load_checkpoint(const std::string& path,
                               std::vector<ParamGroup>& groups);

// Header inspection without a model.
nlohmann::json read_checkpoint_meta(const std::string& path);

} // namespace railgen::nn
