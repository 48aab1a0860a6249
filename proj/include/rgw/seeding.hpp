#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rgw {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// FNV-1a over the label bytes; stable across platforms and runs.
constexpr std::uint64_t label_hash(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Named substream of a parent seed. Every random quantity in the project is
/// drawn from a stream obtained by chaining `derive_seed` calls from a single
/// user seed, e.g. derive_seed(derive_seed(master, "trial", 3), "mu").
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) {
  return mix64(parent ^ mix64(label_hash(label)));
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label,
                                    std::uint64_t index) {
  return mix64(derive_seed(parent, label) + mix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace rgw
