// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

#include "diffrl/teacher.hpp"

namespace diffrl {

// Rectangular lattice over 1 or 2 dimensions; values live at cell centers.
struct GridSpec {
    Vec lo, hi;
    std::vector<int> resolution;

    int dims() const { return static_cast<int>(resolution.size()); }
    double cell_size(int d) const;
    double cell_volume() const;
    size_t cell_count() const;
    double coord(int d, int index) const;  // center of cell `index` along axis d
    void validate() const;
};

// Normalized density on a grid: sum(values) * cell_volume ~= 1.
struct GridDensity {
    GridSpec grid;
    std::vector<double> values;

    double mass() const;
};

struct MomentReport {
    Vec mean;
    Vec variance;
    Vec skewness;
    Vec excess_kurtosis;
    int modality = 0;

    // Gaussianity verdict used by the breakdown demonstration.
    bool is_gaussian(double tol = 1e-3) const;
};

struct KernelGridResult {
    GridDensity density;
    MomentReport moments;
    double leaked_mass = 0.0;
};

// Marginalizes the chain of teacher posterior transitions from a point mass
// at x_start at t_hi down to t_lo. The first transition is evaluated
// analytically on the grid; the remaining ones are grid-to-grid kernel
// applications with the Gaussian truncated at 8 standard deviations.
// Probability mass leaking past the grid boundary above 1e-3 is an error
// (grid too coarse / too small).
KernelGridResult compose_kernel_grid(const Denoiser& net, const NoiseSchedule& schedule, int t_hi,
                                     int t_lo, const Vec& x_start, const GridSpec& grid);

// Continues the composition from an existing density at t_hi down to t_lo
// (Chapman-Kolmogorov staging).
GridDensity compose_from_density(const Denoiser& net, const NoiseSchedule& schedule, int t_hi,
                                 int t_lo, const GridDensity& start);

MomentReport grid_moments(const GridDensity& density);

// 0.5 * integral |p - q|; grids must match.
double total_variation(const GridDensity& a, const GridDensity& b);

// Plain-text matrix dump (rows = second axis, or a single row in 1D).
void dump_matrix(const GridDensity& density, std::ostream& os);

}  // namespace diffrl
