#ifndef NFLOC_RNG_HPP
#define NFLOC_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace nfloc {

// splitmix64 finalizer; used to derive independent per-trial streams from
// (master seed, indices) tuples.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x6f6c666eULL;
    for (std::uint64_t p : parts) h = mix64(h ^ p);
    return h;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
    std::seed_seq seq{seed, mix64(seed)};
    return std::mt19937_64(seq);
}

} // namespace nfloc

#endif
