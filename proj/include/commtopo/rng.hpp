#pragma once

#include <cstdint>

namespace commtopo {

/// splitmix64 single step; also used to derive independent substream seeds.
uint64_t splitmix64(uint64_t& state);

/// Deterministic seed for substream `stream` of a base seed.
uint64_t derive_seed(uint64_t base, uint64_t stream);

/// xoshiro256++ generator with Box-Muller gaussians. Fully self-contained so
/// streams are bit-stable across platforms and standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    double uniform01();  // in [0, 1)
    double gaussian();   // standard normal
    int uniform_int(int n);  // in [0, n), n >= 1

private:
    uint64_t s_[4];
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace commtopo
