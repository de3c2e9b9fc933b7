#pragma once

// Seed discipline for Monte Carlo trials.
//
// Every random stream used by a trial is seeded from
// (master_seed, trial_index, purpose, sub_index) through a SplitMix64 chain,
// so any subset of trials can be re-run in isolation and reproduce bit-exactly.

#include <cstdint>
#include <random>

namespace advdiv {

using Rng = std::mt19937_64;

enum class StreamPurpose : std::uint64_t {
  velocity = 0x76656c6f,  // "velo"
  noise = 0x6e6f6973,     // "nois", sub_index = receiver index
  data = 0x64617461,      // "data"
};

constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t trial_index,
                                    StreamPurpose purpose, std::uint64_t sub_index = 0) {
  std::uint64_t state = master_seed;
  std::uint64_t h = splitmix64(state);
  for (std::uint64_t word : {trial_index, static_cast<std::uint64_t>(purpose), sub_index}) {
    state = h ^ word;
    h = splitmix64(state);
  }
  return h;
}

inline Rng make_stream(std::uint64_t master_seed, std::uint64_t trial_index,
                       StreamPurpose purpose, std::uint64_t sub_index = 0) {
  return Rng(derive_seed(master_seed, trial_index, purpose, sub_index));
}

}  // namespace advdiv
