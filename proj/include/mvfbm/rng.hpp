#pragma once

#include <cstdint>
#include <random>

namespace mvfbm {

// Random-stream splitting contract.
//
// Every random source in the library is a std::mt19937_64 whose 64-bit seed is
// a pure function of (seed, replication, particle, coordinate):
//
//   id          = splitmix64(splitmix64(splitmix64(replication) ^ particle)
//                            ^ coordinate)
//   engine_seed = splitmix64(splitmix64(seed) ^ id)
//
// Paths generated from a plain index i (sample-fbm) use id = i directly. The
// numbers a particle sees never depend on execution order or thread count.
// Normals come from std::normal_distribution, so bit-reproducibility is
// promised only within one standard library implementation.

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct StreamKey {
  std::uint64_t replication = 0;
  std::uint64_t particle = 0;
  std::uint64_t coordinate = 0;
};

// Collapses a key into the single stream id stored on generated paths.
constexpr std::uint64_t stream_id(const StreamKey& key) noexcept {
  std::uint64_t s = splitmix64(key.replication);
  s = splitmix64(s ^ key.particle);
  return splitmix64(s ^ key.coordinate);
}

constexpr std::uint64_t stream_seed(std::uint64_t seed,
                                    std::uint64_t id) noexcept {
  return splitmix64(splitmix64(seed) ^ id);
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t id) {
  return std::mt19937_64(stream_seed(seed, id));
}

}  // namespace mvfbm
