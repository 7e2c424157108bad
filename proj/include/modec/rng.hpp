#pragma once

#include <cstdint>
#include <random>

namespace modec {

// Named sub-streams derived from one root seed. Every component draws from
// its own stream so adding draws in one place never perturbs another.
enum class Stream : std::uint64_t {
    init = 1,
    data = 2,
    train = 3,
    curve = 4,
    fge = 5,
    jitter = 6,
};

// splitmix64 finalizer; decorrelates (seed, stream) pairs.
inline std::uint64_t mix_seed(std::uint64_t seed, Stream stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(stream);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
    return std::mt19937_64(mix_seed(seed, stream));
}

}  // namespace modec
