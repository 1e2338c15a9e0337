#pragma once

#include <cstdint>
#include <random>

namespace fdidet {

// splitmix64; used to derive independent seeds from (master, index) pairs.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x9e3779b97f4a7c15ULL));
}

// Per-path RNG. Process/observation noise and attack noise draw from
// separate streams, so toggling the attack does not perturb the plant.
struct PathRng {
    std::mt19937_64 process;
    std::mt19937_64 attack;

    explicit PathRng(std::uint64_t seed)
        : process(derive_seed(seed, 0)), attack(derive_seed(seed, 1)) {}
};

}  // namespace fdidet
