// Counter-based random number generation (Philox4x64-10, Salmon et al.,
// "Parallel random numbers: as easy as 1, 2, 3", SC 2011).
//
// Every random quantity in the library is a pure function of
// (seed, path_index) x (stream, kind/level, flat index, component), so path
// generation is order-independent and bit-reproducible under any worker
// count. Refinement levels and auxiliary streams occupy disjoint counters by
// construction.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace srk {

namespace detail {

inline void mulhilo64(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

}  // namespace detail

struct PhiloxKey {
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;
};

using PhiloxCounter = std::array<std::uint64_t, 4>;

inline std::array<std::uint64_t, 4> philox4x64(PhiloxKey key, PhiloxCounter ctr) {
  constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
  constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
  constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
  constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

  std::uint64_t k0 = key.seed, k1 = key.path_index;
  for (int round = 0; round < 10; ++round) {
    std::uint64_t hi0, lo0, hi1, lo1;
    detail::mulhilo64(kMul0, ctr[0], hi0, lo0);
    detail::mulhilo64(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return {ctr[0], ctr[1], ctr[2], ctr[3]};
}

// Uniform in (0,1): 53 random bits centered in the bin so 0 and 1 are excluded.
inline double uniform_open01(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// One standard normal per counter via Box-Muller on two of the four output
// words. Deterministic and stateless.
inline double standard_normal(PhiloxKey key, PhiloxCounter ctr) {
  const auto words = philox4x64(key, ctr);
  const double u1 = uniform_open01(words[0]);
  const double u2 = uniform_open01(words[1]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Counter layout shared by all noise streams.
enum class DrawKind : std::uint64_t { base = 0, refine = 1 };

inline PhiloxCounter noise_counter(std::uint64_t stream, DrawKind kind, std::uint64_t level, std::uint64_t flat_index,
                                   std::uint64_t component) {
  return {stream, (static_cast<std::uint64_t>(kind) << 32) | level, flat_index, component};
}

}  // namespace srk
