#pragma once

/**
 * Deterministic, platform-independent randomness.
 *
 * Everything seed-related in this project goes through this header so that
 * a (base_seed, problem_id, repeat) triple produces the same draws on every
 * machine and compiler. std::shuffle / std::uniform_int_distribution are
 * deliberately avoided: their outputs are implementation-defined.
 *
 * Generator: splitmix64 (Steele et al.), 64-bit state, one multiply-xorshift
 * finalizer per draw. Streams are split by remixing the parent state with a
 * label hash, so (run, repeat, problem) streams are independent.
 */

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace deepconf {

class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, n). Rejection sampling keeps the draw unbiased.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t threshold = (0ULL - n) % n;  // 2^64 mod n
    std::uint64_t r = next_u64();
    while (r < threshold) r = next_u64();
    return r % n;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (one value per call, spare discarded).
  double next_normal() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

private:
  std::uint64_t state_;
};

/// FNV-1a over a byte string; used to fold identifiers into seeds.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Splits a seed by a 64-bit label. Order-sensitive and collision-resistant
/// enough for experiment bookkeeping.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t label) {
  return mix64(seed ^ (label + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

inline std::uint64_t split_seed(std::uint64_t seed, std::string_view label) {
  return split_seed(seed, fnv1a64(label));
}

/// Fisher-Yates shuffle driven by Rng::next_below.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

/// First k positions of a seeded permutation of [0, n).
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace deepconf
