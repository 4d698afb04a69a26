#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace railgen {

// Deterministic random stream. Distributions are hand-rolled on top of
// mt19937_64 so sequences are identical across standard libraries and
// across processes for the same seed.
class RandomStream {
public:
  explicit RandomStream(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller, one cached value
  double normal();

  // uniform integer in [0, n), n >= 1
  int64_t uniform_int(int64_t n);

  // uniform integer in [lo, hi] inclusive
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return lo + uniform_int(hi - lo + 1);
  }

private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

// Named-purpose seed derivation: all randomness in a run fans out from one
// root seed through (purpose, index) labels.
uint64_t derive_seed(uint64_t root, std::string_view purpose, uint64_t index = 0);

} // namespace railgen
