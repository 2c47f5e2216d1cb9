#include "dgro/rng.hpp"

#include <cmath>
#include <numbers>

namespace dgro {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SeedStream::SeedStream(std::uint64_t seed, std::uint64_t prompt_index,
                       std::uint64_t rollout_index, std::uint64_t step) {
  std::uint64_t k = splitmix64(seed);
  k = splitmix64(k ^ splitmix64(prompt_index ^ 0x632be59bd9b4e019ULL));
  k = splitmix64(k ^ splitmix64(rollout_index ^ 0x9e6c63d0876a9a47ULL));
  k = splitmix64(k ^ splitmix64(step ^ 0xd1b54a32d192ed03ULL));
  key_ = k;
}

std::uint64_t SeedStream::next_u64() {
  return splitmix64(key_ ^ splitmix64(counter_++));
}

Scalar SeedStream::next_unit() {
  return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53;
}

Scalar SeedStream::next_normal() {
  // Box-Muller; u1 nudged away from 0 so the log stays finite.
  Scalar u1 = next_unit();
  Scalar u2 = next_unit();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi_v<Scalar> * u2);
}

int SeedStream::next_categorical(std::span<const Scalar> probs) {
  const Scalar u = next_unit();
  Scalar cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

std::uint64_t SeedStream::next_below(std::uint64_t n) {
  // Rejection-free modulo is fine here: n is tiny relative to 2^64, and
  // reproducibility matters more than the ~n/2^64 bias.
  return n == 0 ? 0 : next_u64() % n;
}

}  // namespace dgro
