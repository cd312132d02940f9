#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace storalloc {

// splitmix64 finalizer; used to spread user seeds and derive replica streams.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
    return std::mt19937_64(mix64(seed));
}

// Independent, reproducible per-replica stream from one root seed.
inline std::mt19937_64 derive_stream(std::uint64_t root_seed, std::uint64_t index) {
    return std::mt19937_64(mix64(mix64(root_seed) + index));
}

// Uniform in [0, 1). Hand-rolled so sequences are identical across platforms
// (std::uniform_real_distribution is implementation-defined).
inline double rand_u01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). Unbiased via rejection.
inline std::uint64_t rand_index(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = rng();
    while (v >= limit) v = rng();
    return v % n;
}

inline double rand_exponential(std::mt19937_64& rng, double rate) {
    return -std::log(1.0 - rand_u01(rng)) / rate;
}

}  // namespace storalloc
