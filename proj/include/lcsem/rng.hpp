#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace lcsem {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Collapses (seed, key, key, ...) into one well-mixed 64-bit stream id, so
/// independent sampling streams can be derived per experiment / repetition.
inline std::uint64_t derive_stream(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = seed;
  (void)splitmix64_next(s);
  for (std::uint64_t k : keys) {
    s ^= k + 0x9E3779B97F4A7C15ull + (s << 6) + (s >> 2);
    (void)splitmix64_next(s);
  }
  return s;
}

/// xoshiro256++ with splitmix64 seeding. Self-contained so that sample output
/// is bit-identical across runs for a fixed (seed, stream) pair.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t sm = seed ^ (0xD2B74407B1CE6E93ull * (stream + 1));
    for (auto& w : s_) w = splitmix64_next(sm);
    has_cached_normal_ = false;
    cached_normal_ = 0.0;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on (0, 1]; never returns 0 so it is safe under log().
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (second value cached).
  double normal() {
    if (has_cached_normal_) {
      has_cached_normal_ = false;
      return cached_normal_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_normal_ = r * std::sin(a);
    has_cached_normal_ = true;
    return r * std::cos(a);
  }

  /// Uniform integer in [0, n), rejection sampled (no modulo bias).
  int uniform_int(int n) {
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return static_cast<int>(v % un);
  }

  /// k distinct values from a pool (partial Fisher-Yates); pool is consumed.
  std::vector<int> choose_without_replacement(std::vector<int> pool, int k) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(k));
    int n = static_cast<int>(pool.size());
    for (int j = 0; j < k; ++j) {
      const int idx = j + uniform_int(n - j);
      std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(idx)]);
      out.push_back(pool[static_cast<std::size_t>(j)]);
    }
    return out;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
  bool has_cached_normal_;
  double cached_normal_;
};

}  // namespace lcsem
