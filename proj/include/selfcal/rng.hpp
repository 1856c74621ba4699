#pragma once

#include <cstdint>
#include <random>

namespace selfcal {

// splitmix64; used to derive independent per-block / per-chain seed streams
// from one user seed so results do not depend on thread count.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed for stream `index` derived from the user seed.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 0x51a2b3c4d5e6f708ULL));
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t index = 0) {
    return std::mt19937_64(stream_seed(seed, index));
}

}  // namespace selfcal
