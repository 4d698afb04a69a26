#pragma once

#include <string>
#include <vector>

namespace railgen::nn {

// Non-owning handle onto one parameter array and its gradient buffer.
struct ParamView {
  std::string name;
  float* value = nullptr;
  float* grad = nullptr;
  size_t size = 0;
};

// Named slice of a model's parameters. Optimizers skip frozen groups;
// checkpoints serialize groups in declaration order.
struct ParamGroup {
  std::string name;
  bool frozen = false;
  std::vector<ParamView> params;

  size_t size() const {
    size_t n = 0;
    for (const auto& p : params) n += p.size;
    return n;
  }
};

size_t total_params(const std::vector<ParamGroup>& groups);

// FNV-1a over the raw float bytes of every param in every group, in order.
// Used to pin a control checkpoint to the base weights it was trained on.
uint64_t content_hash(const std::vector<ParamGroup>& groups);

} // namespace railgen::nn
