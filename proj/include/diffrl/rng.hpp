// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "diffrl/common.hpp"

namespace diffrl {

// Deterministic xoshiro256++ generator with explicit substream derivation.
// Every stochastic operation in the library draws from an Rng constructed
// from (seed, stream_id), so runs are reproducible bit-for-bit and
// per-trajectory streams are independent of evaluation order.
class Rng {
public:
    explicit Rng(uint64_t seed) : Rng(seed, 0) {}
    Rng(uint64_t seed, uint64_t stream_id);

    uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();

    // Standard normal via Box-Muller with a cached spare.
    double normal();

    Vec normal_vec(int dim);

    // Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi);

private:
    uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Stable 64-bit mix used to derive child seeds (epoch seeds, trajectory
// streams) from a root seed without correlation between streams.
uint64_t mix_seed(uint64_t seed, uint64_t tag);

}  // namespace diffrl
