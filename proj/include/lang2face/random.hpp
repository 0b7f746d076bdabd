#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace lang2face {

// splitmix64; used both as a mixer for seed derivation and as the
// generator behind RandomStream. Counter-based seeding keeps every
// consumer (init, data order, noise) independent of call order, which
// is what makes checkpoint resume exact.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t s = a;
  uint64_t x = splitmix64(s) ^ b;
  return splitmix64(x);
}

inline uint64_t hash_string(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a 64
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Deterministic random stream. All distributions are implemented by
// hand (std:: distributions are not pinned by the standard).
class RandomStream {
 public:
  explicit RandomStream(uint64_t seed) : state_(seed) {}
  RandomStream(uint64_t seed, const std::string& tag)
      : state_(mix_seed(seed, hash_string(tag))) {}
  RandomStream(uint64_t seed, const std::string& tag, uint64_t counter)
      : state_(mix_seed(mix_seed(seed, hash_string(tag)), counter)) {}

  uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // i in [0, n)
  uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(uniform_index(static_cast<uint64_t>(hi - lo + 1)));
  }

  // Box-Muller; both values computed, one discarded, so the stream
  // advances by a fixed amount per call.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  uint64_t state() const { return state_; }
  void set_state(uint64_t s) { state_ = s; }

 private:
  uint64_t state_;
};

}  // namespace lang2face
