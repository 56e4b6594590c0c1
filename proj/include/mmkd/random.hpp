#pragma once

#include <cstdint>
#include <initializer_list>

namespace mmkd {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a sequence of
/// tags (epoch, step, purpose, ...). All randomness in the kit flows through
/// this so that a single run seed reproduces every draw.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = mix64(base);
  for (auto t : tags) h = mix64(h ^ mix64(t + 0x632BE59BD9B4E019ULL));
  return h;
}

// Stream tags.
inline constexpr std::uint64_t kTagShuffle = 1;
inline constexpr std::uint64_t kTagTlm = 2;
inline constexpr std::uint64_t kTagXwcl = 3;
inline constexpr std::uint64_t kTagDropout = 4;
inline constexpr std::uint64_t kTagRotation = 5;
inline constexpr std::uint64_t kTagPrune = 6;
inline constexpr std::uint64_t kTagInit = 7;
inline constexpr std::uint64_t kTagMlm = 8;
inline constexpr std::uint64_t kTagSelect = 9;

}  // namespace mmkd
