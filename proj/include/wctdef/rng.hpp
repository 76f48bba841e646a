#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace wctdef {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

// Seed fan-out rule: every stochastic component draws from an mt19937_64
// seeded with derive_seed(global_seed, component_tag, index). Tags in use:
//   "model.init"            index = parameter ordinal
//   "train.shuffle"         index = epoch
//   "gallery.sample"        index = gallery layer id
//   "attack.pgd.start"      index = image id
//   "attack.saltpepper"     index = image id
//   "data.synth"            index = sample id (test fixtures)
inline uint64_t derive_seed(uint64_t global_seed, std::string_view tag,
                            uint64_t index = 0) {
  uint64_t state = global_seed ^ fnv1a64(tag);
  state ^= 0x9E3779B97F4A7C15ull * (index + 1);
  splitmix64(state);
  return splitmix64(state);
}

// mt19937_64 wrapper with portable draw functions. std::*_distribution is
// implementation-defined, so uniform/normal are spelled out here.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t uniform_int(uint64_t n) {
    uint64_t threshold = (~n + 1) % n;  // rejection sampling, unbiased
    for (;;) {
      uint64_t r = gen_();
      if (r >= threshold) return r % n;
    }
  }

  // standard normal via Box-Muller
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.28318530717958647692 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace wctdef
