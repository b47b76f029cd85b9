#pragma once

#include <cstdint>
#include <random>

namespace semcom {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream). Streams keep data generation,
/// augmentation, batching, channel noise and evaluation decoupled so that
/// changing one consumer never shifts another's draws.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x5eC0u};
  return Rng(seq);
}

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

inline double uniform01(Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

namespace streams {
inline constexpr std::uint64_t data_means = 1;
inline constexpr std::uint64_t data_mixing = 2;
inline constexpr std::uint64_t data_samples = 3;
inline constexpr std::uint64_t label_subset = 4;
inline constexpr std::uint64_t init = 10;
inline constexpr std::uint64_t pretrain_batches = 20;
inline constexpr std::uint64_t augmentation = 21;
inline constexpr std::uint64_t finetune_batches = 30;
inline constexpr std::uint64_t channel_train = 31;
inline constexpr std::uint64_t channel_eval = 32;
}  // namespace streams

}  // namespace semcom
