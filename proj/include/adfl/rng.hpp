#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace adfl {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Seed of the named stream `name` (optionally indexed, e.g. per device)
/// derived from one master seed. Streams are independent of each other, so
/// adding draws to one consumer never perturbs another.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::string_view name,
                                    std::uint64_t index = 0) noexcept {
  return splitmix64(splitmix64(master ^ fnv1a64(name)) + index);
}

inline Rng make_stream(std::uint64_t master, std::string_view name,
                       std::uint64_t index = 0) {
  return Rng{stream_seed(master, name, index)};
}

}  // namespace adfl
