// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "diffrl/common.hpp"
#include "diffrl/rng.hpp"

namespace diffrl {

enum class DataKind { gmm_ring, checkerboard };

// Synthetic target distributions. The default task is a ring of Gaussian
// modes; the checkerboard is a uniform mixture over alternating unit squares.
struct DataSpec {
    DataKind kind = DataKind::gmm_ring;
    int dim = 2;
    int mode_count = 8;
    std::vector<Vec> mode_means;
    std::vector<double> weights;  // mixture weights, sum to 1
    double mode_std = 0.15;
    double radius = 4.0;  // ring radius (gmm_ring) or half board width (checkerboard)

    static DataSpec gmm_ring(int modes, double radius, double mode_std, int dim = 2);
    static DataSpec checkerboard();

    Vec sample(Rng& rng) const;
    Vec sample_mode(int mode, Rng& rng) const;
    double log_density(const Vec& x) const;
    int nearest_mode(const Vec& x) const;
    Vec mode_centroid() const;

    void validate() const;
};

}  // namespace diffrl
