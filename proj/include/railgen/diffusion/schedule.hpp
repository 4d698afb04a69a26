#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "railgen/core/error.hpp"
#include "railgen/core/tensor.hpp"

namespace railgen::diffusion {

// Per-timestep noise fractions beta_1..beta_T, each in (0,1).
struct NoiseSchedule {
  std::vector<double> betas;
  int T = 0;
  std::string kind;

  double beta(int t) const { return betas[static_cast<size_t>(t) - 1]; }
};

NoiseSchedule make_schedule(const std::string& kind, int T, double beta_start,
                            double beta_end);

// x_t = sqrt(1 - beta) * x_prev + sqrt(beta) * eps, elementwise.
template <class S>
void forward_step(std::span<const S> x_prev, S beta, std::span<const S> eps,
                  std::span<S> out) {
  if (x_prev.size() != eps.size() || x_prev.size() != out.size())
    fail("ShapeError", "forward_step: size mismatch");
  if (!(beta > 0 && beta <= 1))
    fail("InvalidSchedule", "forward_step: beta outside (0,1]");
  const S a = std::sqrt(S(1) - beta);
  const S b = std::sqrt(beta);
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = a * x_prev[i] + b * eps[i];
}

// x_prev = (x_t - sqrt(beta) * eps_hat) / sqrt(1 - beta), elementwise.
template <class S>
void reverse_step(std::span<const S> x_t, std::span<const S> eps_hat, S beta,
                  std::span<S> out) {
  if (x_t.size() != eps_hat.size() || x_t.size() != out.size())
    fail("ShapeError", "reverse_step: size mismatch");
  if (beta >= 1)
    fail("DivisionByZeroGuard", "reverse_step: beta = 1 divides by zero");
  if (!(beta > 0))
    fail("InvalidSchedule", "reverse_step: beta outside (0,1)");
  const S a = std::sqrt(S(1) - beta);
  const S b = std::sqrt(beta);
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = (x_t[i] - b * eps_hat[i]) / a;
}

// Mean over all elements of the squared difference.
template <class S>
double dm_loss(std::span<const S> eps, std::span<const S> eps_hat) {
  if (eps.size() != eps_hat.size() || eps.empty())
    fail("ShapeError", "dm_loss: size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < eps.size(); ++i) {
    double d = static_cast<double>(eps[i]) - static_cast<double>(eps_hat[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(eps.size());
}

// Tensor conveniences over the templated kernels.
Tensor forward_step(const Tensor& x_prev, double beta, const Tensor& eps);
Tensor reverse_step(const Tensor& x_t, const Tensor& eps_hat, double beta);
double dm_loss(const Tensor& eps, const Tensor& eps_hat);

} // namespace railgen::diffusion
