#pragma once

#include <cstdint>
#include <span>

#include "dgro/linalg.hpp"

namespace dgro {

/// Counter-based deterministic random stream.
///
/// Each stream is keyed by (seed, prompt_index, rollout_index, step) and
/// produces a platform-independent sequence: draw i depends only on the key
/// and i, never on global state. Distinct keys give statistically independent
/// streams, so sampling across prompts and rollouts can run in any order (or
/// concurrently) without changing results.
class SeedStream {
 public:
  SeedStream(std::uint64_t seed, std::uint64_t prompt_index,
             std::uint64_t rollout_index, std::uint64_t step);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  Scalar next_unit();

  /// Standard normal via Box-Muller (two unit draws per call).
  Scalar next_normal();

  /// Index into `probs` by inverse-CDF walk; probs must be nonnegative and
  /// sum to ~1. Returns the last index if rounding leaves u past the total.
  int next_categorical(std::span<const Scalar> probs);

  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// SplitMix64 finalizer; the mixing core of SeedStream, exposed for key
/// derivation elsewhere (e.g. hashing payload tuples into stream keys).
std::uint64_t splitmix64(std::uint64_t z);

}  // namespace dgro
