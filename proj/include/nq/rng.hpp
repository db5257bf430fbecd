#pragma once

#include <cstdint>
#include <random>

namespace nq {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Independent stream seed for (seed, stream, index), e.g. (run seed,
// "sampling", epoch).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  return Rng(derive_seed(seed, stream, index));
}

// Stream tags.
enum Stream : std::uint64_t {
  kStreamInit = 1,
  kStreamTriplets = 2,
  kStreamLabelSubset = 3,
  kStreamLabelPairs = 4,
  kStreamGumbel = 5,
  kStreamOrder = 6,
  kStreamSplit = 7,
  kStreamEval = 8,
  kStreamSynth = 9,
};

}  // namespace nq
