#pragma once

#include <cmath>
#include <cstdint>

namespace sili {

namespace detail {
// SplitMix64 finalizer. Every draw below is a pure function of (key, counter),
// so streams are reproducible across platforms and can be split freely.
inline uint64_t mix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Counter-based deterministic generator. A stream is identified by a key
/// derived from (seed, stream_a, stream_b); successive draws hash an
/// incrementing counter against the key. Splitting derives an independent
/// child key, which is how per-(epoch, sample) streams are handed to
/// parallel data loaders without any shared state.
class SplitRng {
 public:
  explicit SplitRng(uint64_t seed, uint64_t stream_a = 0, uint64_t stream_b = 0) {
    key_ = detail::mix64(seed);
    key_ = detail::mix64(key_ ^ detail::mix64(stream_a ^ 0xA5A5A5A5A5A5A5A5ULL));
    key_ = detail::mix64(key_ ^ detail::mix64(stream_b ^ 0xC3C3C3C3C3C3C3C3ULL));
  }

  SplitRng split(uint64_t lane) const {
    SplitRng child(0);
    child.key_ = detail::mix64(key_ ^ detail::mix64(lane ^ 0x5C5C5C5C5C5C5C5CULL));
    child.ctr_ = 0;
    return child;
  }

  uint64_t next_u64() { return detail::mix64(key_ + 0x9E3779B97F4A7C15ULL * ++ctr_); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], both ends inclusive. Rejection sampling,
  /// so the distribution is exact.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    if (hi <= lo) return lo;
    uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
    uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return lo + static_cast<int64_t>(v % range);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller. Always consumes exactly two draws and
  /// returns one value; no cached state, so streams stay resumable.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  uint64_t key_ = 0;
  uint64_t ctr_ = 0;
};

}  // namespace sili
