#pragma once

#include <cstdint>
#include <random>

namespace m2oe2 {

using Rng = std::mt19937_64;

/// Independent random streams derived from the single run seed.
enum class Stream : std::uint64_t {
  init = 1,              // parameter initialization
  shuffle = 2,           // per-epoch batch order; index = epoch
  train_noise = 3,       // reparameterization noise; index = global step
  validation_noise = 4,  // fixed across epochs
  eval_noise = 5,        // index = instance position in the evaluated set
  synthetic = 6,         // synthetic data generation
  gradcheck = 7,
};

/// Seed splitting rule: splitmix64 applied to the run seed, then mixed with
/// the stream id, then with the index. Every random draw in the library
/// comes from an Rng seeded this way, so a run is a function of its seed.
std::uint64_t split_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  return Rng(split_seed(seed, stream, index));
}

}  // namespace m2oe2
