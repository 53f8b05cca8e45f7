// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "diffrl/common.hpp"

namespace diffrl {

enum class ScheduleKind { linear, cosine };

// Forward-process variance schedule. Timesteps are 1-based: beta(t) for
// t in [1, steps], with alpha_bar(0) defined as 1 so the posterior
// coefficients are valid at every step.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::linear;
    int steps = 0;                 // T
    double beta_min = 0.0;         // construction descriptor, kept for checkpoints
    double beta_max = 0.0;
    std::vector<double> betas;     // index t-1 holds beta_t
    std::vector<double> alphas;    // alpha_t = 1 - beta_t
    std::vector<double> alpha_bars;

    double beta(int t) const { return betas.at(static_cast<size_t>(t - 1)); }
    double alpha(int t) const { return alphas.at(static_cast<size_t>(t - 1)); }
    double alpha_bar(int t) const {
        return t == 0 ? 1.0 : alpha_bars.at(static_cast<size_t>(t - 1));
    }

    // Reverse-process posterior q(x_{t-1} | x_t, x_0) = N(mu, var I) with
    //   mu = x0_coef(t) * x0 + x_coef(t) * x_t.
    // The variance at t=1 is exactly zero in the standard construction; it is
    // floored at 1e-12 so every transition keeps a proper log-density.
    double posterior_variance(int t) const;
    double posterior_x0_coef(int t) const;
    double posterior_x_coef(int t) const;

    void validate_t(int t) const;
};

// Builds a schedule. The linear kind interpolates beta affinely from
// beta_min (t=1) to beta_max (t=T). The cosine kind uses the squared-cosine
// alpha_bar profile with betas clamped into [beta_min, beta_max].
NoiseSchedule build_schedule(ScheduleKind kind, int steps, double beta_min, double beta_max);

// Closed-form forward marginal: sqrt(abar_t) x0 + sqrt(1 - abar_t) noise.
Vec forward_marginal(const NoiseSchedule& schedule, const Vec& x0, int t, const Vec& noise);

}  // namespace diffrl
