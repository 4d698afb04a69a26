#include "railgen/diffusion/schedule.hpp"

namespace railgen::diffusion {

NoiseSchedule make_schedule(const std::string& kind, int T, double beta_start,
                            double beta_end) {
  if (kind != "linear")
    fail("InvalidSchedule", "unknown schedule kind: " + kind);
  if (T < 1) fail("InvalidSchedule", "schedule length must be >= 1");
  if (!(beta_start > 0 && beta_start <= beta_end && beta_end < 1))
    fail("InvalidSchedule", "betas must satisfy 0 < start <= end < 1");

  NoiseSchedule s;
  s.kind = kind;
  s.T = T;
  s.betas.resize(static_cast<size_t>(T));
  if (T == 1) {
    s.betas[0] = beta_start;
  } else {
    for (int t = 1; t <= T; ++t)
      s.betas[static_cast<size_t>(t) - 1] =
          beta_start + (t - 1) / static_cast<double>(T - 1) *
                           (beta_end - beta_start);
  }
  return s;
}

namespace {
void check_same(const Tensor& a, const Tensor& b, const char* who) {
  if (!a.same_shape(b)) fail("ShapeError", std::string(who) + ": shape mismatch");
}
} // namespace

Tensor forward_step(const Tensor& x_prev, double beta, const Tensor& eps) {
  check_same(x_prev, eps, "forward_step");
  Tensor out(x_prev.shape());
  forward_step<float>({x_prev.data(), x_prev.size()},
                      static_cast<float>(beta), {eps.data(), eps.size()},
                      {out.data(), out.size()});
  return out;
}

Tensor reverse_step(const Tensor& x_t, const Tensor& eps_hat, double beta) {
  check_same(x_t, eps_hat, "reverse_step");
  Tensor out(x_t.shape());
  reverse_step<float>({x_t.data(), x_t.size()},
                      {eps_hat.data(), eps_hat.size()},
                      static_cast<float>(beta), {out.data(), out.size()});
  return out;
}

double dm_loss(const Tensor& eps, const Tensor& eps_hat) {
  check_same(eps, eps_hat, "dm_loss");
  return dm_loss<float>({eps.data(), eps.size()},
                        {eps_hat.data(), eps_hat.size()});
}

} // namespace railgen::diffusion
