#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace rfcloak {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Labeled seed derivation: every random stream in the project is a pure
// function of (base seed, stage label, indices), independent of call order.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                                    std::initializer_list<std::uint64_t> indices = {}) {
    std::uint64_t h = splitmix64(base ^ fnv1a(label));
    for (std::uint64_t i : indices) h = splitmix64(h ^ splitmix64(i + 0x632be59bd9b4e019ULL));
    return h;
}

inline Rng make_rng(std::uint64_t base, std::string_view label,
                    std::initializer_list<std::uint64_t> indices = {}) {
    return Rng(derive_seed(base, label, indices));
}

}  // namespace rfcloak
