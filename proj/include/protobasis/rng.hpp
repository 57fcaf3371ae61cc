#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace protobasis {

using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Stable 64-bit hash of a tag, used to key RNG substreams by name.
inline std::uint64_t tag_hash(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent substream seed from a base seed and a path of keys.
/// Serial and parallel callers that use the same path get the same stream.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = detail::splitmix64(base);
  for (std::uint64_t key : path) s = detail::splitmix64(s ^ detail::splitmix64(key + 0x632be59bd9b4e019ULL));
  return s;
}

inline Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

}  // namespace protobasis
