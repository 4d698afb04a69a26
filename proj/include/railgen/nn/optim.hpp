#pragma once

#include <Eigen/Core>
#include <string>
#include <unordered_map>
#include <vector>

#include "railgen/nn/params.hpp"

namespace railgen::nn {

// Adam with bias correction. Moment buffers are keyed by parameter name,
// so the same optimizer instance survives group re-collection. Frozen
// groups are never touched, not even their moments.
class Adam {
public:
  explicit Adam(float lr, float beta1 = 0.9f, float beta2 = 0.999f,
                float eps = 1e-8f)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<ParamGroup>& groups);
  static void zero_grad(std::vector<ParamGroup>& groups);

  float lr() const { return lr_; }
  void set_lr(float lr) { lr_ = lr; }

private:
  float lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::unordered_map<std::string, Eigen::VectorXf> m_, v_;
};

} // namespace railgen::nn
