#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace voxuad {

/// Deterministic random stream. Wraps std::mt19937_64 (whose raw output is
/// pinned by the standard) and supplies its own value transforms, so a given
/// key produces the same draws on every platform and standard library.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive. Uses rejection to stay unbiased.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    if (span == 0) return lo + static_cast<int64_t>(engine_());  // full range
    uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return lo + static_cast<int64_t>(r % span);
  }

  bool coin() { return (engine_() >> 63) != 0; }

  /// Standard normal via Box-Muller (one value per call; pair cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// FNV-1a, used both for seed derivation and for content digests.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t hash_combine(uint64_t h, uint64_t v) {
  return fnv1a64(&v, sizeof(v), h);
}

inline uint64_t hash_combine(uint64_t h, std::string_view s) {
  return fnv1a64(s.data(), s.size(), h);
}

/// Derives an independent stream key from a base seed and a structured key,
/// e.g. stream_key(seed, "erasing", subject_id, epoch). Used so augmentation
/// draws do not depend on data order.
template <typename... Parts>
uint64_t stream_key(uint64_t seed, Parts... parts) {
  uint64_t h = fnv1a64(&seed, sizeof(seed));
  ((h = hash_combine(h, parts)), ...);
  // splitmix64 finalizer; avoids correlated mt19937 seeds for nearby keys
  h += 0x9e3779b97f4a7c15ULL;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
  return h ^ (h >> 31);
}

}  // namespace voxuad
