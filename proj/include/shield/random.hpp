#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace shield {

using Rng = std::mt19937_64;

/// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Deterministic child seed from a base seed and a sequence of indices.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = mix64(base);
    for (auto p : path) s = mix64(s ^ mix64(p + 0x632BE59BD9B4E019ULL));
    return s;
}

}  // namespace shield
