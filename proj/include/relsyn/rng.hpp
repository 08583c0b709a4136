#pragma once

#include <cstdint>
#include <random>

namespace relsyn {

// splitmix64; used to derive independent named streams from one base seed so
// results do not depend on how work is split across workers.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
    uint64_t s = base ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    splitmix64(s);
    return splitmix64(s);
}

struct Rng {
    std::mt19937_64 gen;

    explicit Rng(uint64_t seed = 0) : gen(seed) {}

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen); }
    uint64_t next() { return gen(); }
};

}  // namespace relsyn
