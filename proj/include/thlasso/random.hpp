#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace thlasso {

using Engine = std::mt19937_64;

// SplitMix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives a child seed from a parent seed and a path of labels. Each label is
// folded in with one mix64 round, so split_seed(s, {a, b}) and
// split_seed(split_seed(s, {a}), {b}) agree.
constexpr std::uint64_t split_seed(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> path) {
  for (std::uint64_t label : path) seed = mix64(seed ^ mix64(label));
  return seed;
}

// Labels of the per-replication streams.
enum class Stream : std::uint64_t {
  kTheta = 0x7468657461ULL,
  kContext = 0x636f6e74ULL,
  kNoise = 0x6e6f697365ULL,
  kTieBreak = 0x746965ULL,
};

constexpr std::uint64_t stream_seed(std::uint64_t replication_seed, Stream s) {
  return split_seed(replication_seed, {static_cast<std::uint64_t>(s)});
}

}  // namespace thlasso
