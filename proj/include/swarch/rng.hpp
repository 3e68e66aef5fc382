#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace swarch {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed splitting rule used everywhere a master seed fans out into independent
/// streams: fold each stream index into the master with SplitMix64, in order.
/// derive_seed(s, {a, b}) == splitmix64(splitmix64(splitmix64(s) ^ a) ^ b).
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> stream) noexcept {
    std::uint64_t s = splitmix64(master);
    for (auto idx : stream) {
        s = splitmix64(s ^ idx);
    }
    return s;
}

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> stream = {}) {
    return Rng{derive_seed(master, stream)};
}

}  // namespace swarch
