#pragma once

#include <cstdint>
#include <random>

namespace darec::nn {

// Named sub-streams derived from one root seed, so that e.g. weight init,
// shuffling and splitting never consume from each other's sequences.
enum class SeedStream : std::uint64_t {
    Init = 1,
    Shuffle = 2,
    Split = 3,
    Interleave = 4,
    Synth = 5,
    Batch = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic stream derivation: root seed -> (stream, index) -> seed.
inline std::uint64_t derive_seed(std::uint64_t root, SeedStream stream,
                                 std::uint64_t index = 0) {
    std::uint64_t s = splitmix64(root);
    s = splitmix64(s ^ static_cast<std::uint64_t>(stream));
    return splitmix64(s ^ index);
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

}  // namespace darec::nn
