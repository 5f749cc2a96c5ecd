// Counter-based 64-bit RNG used by every stochastic component.
//
// The generator is the splitmix64 finalizer applied to key ^ (counter * GAMMA),
// so the i-th draw depends only on (key, i). This makes streams trivially
// splittable, checkpointable as two integers, and bit-identical across
// platforms. Gaussians take exactly two draws (Box-Muller, no cached spare).
#pragma once

#include <cmath>
#include <cstdint>

namespace tagg {

class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(uint64_t seed) : key_(mix(seed ^ 0x8e51'ecab'734f'01d2ULL)) {}

  static Rng restore(uint64_t key, uint64_t counter) {
    Rng r;
    r.key_ = key;
    r.counter_ = counter;
    return r;
  }

  // Independent substream; derived deterministically from this stream's key
  // without consuming any draws.
  Rng split(uint64_t stream) const {
    Rng r;
    r.key_ = mix(key_ ^ mix(stream + 0x9e37'79b9'7f4a'7c15ULL));
    return r;
  }

  uint64_t next_u64() {
    ++counter_;
    return mix(key_ ^ (counter_ * 0x9e37'79b9'7f4a'7c15ULL));
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Bias is < n / 2^64, negligible for our n.
  uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }

  double gaussian(double mean, double sigma) {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(6.283185307179586 * u2);
  }

  uint64_t key() const { return key_; }
  uint64_t counter() const { return counter_; }

 private:
  static uint64_t mix(uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58'476d'1ce4'e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d0'49bb'1331'11ebULL;
    z ^= z >> 31;
    return z;
  }

  uint64_t key_ = 0;
  uint64_t counter_ = 0;
};

}  // namespace tagg
