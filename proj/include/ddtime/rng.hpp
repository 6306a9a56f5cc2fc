#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace ddtime {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Sub-seed for an independent stream: splitmix64(master + stream * golden).
/// Stages use fixed stream ids so each can be rerun on its own.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  return splitmix64(master + stream * 0x9E3779B97F4A7C15ULL);
}

namespace seed_stream {
inline constexpr std::uint64_t teachers = 1;
inline constexpr std::uint64_t synthetic_init = 2;
inline constexpr std::uint64_t segments = 3;
inline constexpr std::uint64_t conditional = 4;
inline constexpr std::uint64_t real_batches = 5;
inline constexpr std::uint64_t eval = 6;
inline constexpr std::uint64_t student_init = 7;
}  // namespace seed_stream

// The std distributions are implementation-defined; these two are not, so
// artifacts stay byte-identical across standard libraries.

/// Uniform integer in [0, n), rejection sampled.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw >= limit);
  return static_cast<std::size_t>(draw % range);
}

/// Uniform real in [lo, hi).
inline double uniform_real(Rng& rng, double lo, double hi) {
  const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

}  // namespace ddtime
