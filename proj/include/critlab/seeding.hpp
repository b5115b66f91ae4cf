#pragma once

#include <cstdint>
#include <random>

namespace critlab {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based seed splitting: the child seed depends only on
/// (master, stream, index), never on evaluation order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index) {
  return splitmix64(splitmix64(master ^ splitmix64(stream + 0x632be59bd9b4e019ULL)) + index);
}

using Engine = std::mt19937_64;

// Named streams; different consumers of one master seed never collide.
namespace stream {
inline constexpr std::uint64_t kField = 1;
inline constexpr std::uint64_t kIntensity = 2;
inline constexpr std::uint64_t kLemma = 3;
inline constexpr std::uint64_t kField1d = 4;
}  // namespace stream

}  // namespace critlab
