#include "railgen/nn/optim.hpp"

#include <cmath>
#include <cstring>

namespace railgen::nn {

void Adam::step(std::vector<ParamGroup>& groups) {
  ++t_;
  const float bc1 = 1.0f - std::pow(beta1_, static_cast<float>(t_));
  const float bc2 = 1.0f - std::pow(beta2_, static_cast<float>(t_));
  for (auto& g : groups) {
    if (g.frozen) continue;
    for (auto& p : g.params) {
      auto& m = m_[p.name];
      auto& v = v_[p.name];
      if (m.size() != static_cast<long>(p.size)) {
        m.setZero(p.size);
        v.setZero(p.size);
      }
      for (size_t i = 0; i < p.size; ++i) {
        float gr = p.grad[i];
        m[i] = beta1_ * m[i] + (1.0f - beta1_) * gr;
        v[i] = beta2_ * v[i] + (1.0f - beta2_) * gr * gr;
        float mhat = m[i] / bc1;
        float vhat = v[i] / bc2;
        p.value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }
}

void Adam::zero_grad(std::vector<ParamGroup>& groups) {
  for (auto& g : groups)
    for (auto& p : g.params)
      std::memset(p.grad, 0, p.size * sizeof(float));
}

} // namespace railgen::nn
