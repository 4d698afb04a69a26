#include "railgen/core/rng.hpp"

#include <cmath>

#include "railgen/core/error.hpp"
#include "railgen/core/hash.hpp"

namespace railgen {

double RandomStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * 3.14159265358979323846 * u2;
  cached_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

int64_t RandomStream::uniform_int(int64_t n) {
  if (n <= 0)
    fail("InvalidArgument", "uniform_int requires n >= 1");
  uint64_t un = static_cast<uint64_t>(n);
  uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  uint64_t v = next_u64();
  while (v >= limit)
    v = next_u64();
  return static_cast<int64_t>(v % un);
}

uint64_t derive_seed(uint64_t root, std::string_view purpose, uint64_t index) {
  uint64_t h = kFnvOffset;
  h = fnv1a64(&root, sizeof(root), h);
  h = fnv1a64(purpose, h);
  h = fnv1a64(&index, sizeof(index), h);
  // avoid the all-zero state just in case
  return h == 0 ? 0x9e3779b97f4a7c15ull : h;
}

std::string to_hex(uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

} // namespace railgen
