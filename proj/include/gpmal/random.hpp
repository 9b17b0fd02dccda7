#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gpmal {

using Rng = std::mt19937_64;

inline std::uint64_t fnv1a(std::string_view text, std::uint64_t hash = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

/// Independent generator for a named consumer ("init", "variation", "folds", ...)
/// derived from the single run seed.
inline Rng make_stream(std::uint64_t seed, std::string_view name) {
    const std::uint64_t tag = fnv1a(name);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
    return Rng(seq);
}

template <std::uniform_random_bit_generator G>
std::size_t uniform_index(G& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

template <std::uniform_random_bit_generator G>
double uniform_unit(G& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace gpmal
