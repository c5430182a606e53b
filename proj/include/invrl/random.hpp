#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace invrl {

/// Engine used for every random stream in the library. Draws are converted
/// with the helpers below rather than <random> distributions so that a seed
/// reproduces the same sequence on every standard library.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits of one engine draw.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by rejection on the 64-bit draw.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stable 64-bit FNV-1a hash, used to key seed derivation by name.
inline std::uint64_t stable_hash(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derives an independent child seed from a parent seed and a counter.
/// Children depend only on (parent, counter), so adding new children never
/// shifts the seeds of existing ones.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t counter) {
    return splitmix64(splitmix64(parent) ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::string_view key) {
    return derive_seed(parent, stable_hash(key));
}

}  // namespace invrl
