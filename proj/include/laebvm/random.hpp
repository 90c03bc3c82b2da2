#pragma once

// Deterministic random streams. Every replicate owns an engine seeded from
// derive_seed(master, tag, n, index), so results do not depend on the order
// or thread in which replicates run.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace laebvm {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Folds the parts left to right through splitmix64. The scheme is
/// s0 = splitmix64(master); s_{k+1} = splitmix64(s_k ^ part_k).
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> parts) {
    std::uint64_t s = splitmix64(master);
    for (const auto p : parts) s = splitmix64(s ^ p);
    return s;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t n,
                                 std::uint64_t index) {
    return derive_seed(master, {fnv1a(tag), n, index});
}

/// Uniform on the open interval (0, 1) from the top 53 bits.
inline double uniform_open(Engine& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double standard_normal(Engine& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

}  // namespace laebvm
