// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>

#include "diffrl/data.hpp"

namespace diffrl {

struct PRDCResult {
    double precision = 0.0;
    double recall = 0.0;
    double density = 0.0;
    double coverage = 0.0;
};

// k-NN-ball fidelity/diversity metrics. A point's ball radius is the
// distance to its k-th nearest neighbor within its own set. Note density is
// unbounded above by construction.
PRDCResult prdc(const std::vector<Vec>& real, const std::vector<Vec>& fake, int k);

// Frechet distance between Gaussian moment fits of the two sample sets:
// |mu1-mu2|^2 + tr(S1 + S2 - 2 (S1 S2)^{1/2}), with the PSD square root
// taken by eigendecomposition and small negative eigenvalues clipped.
double frechet_distance(const std::vector<Vec>& a, const std::vector<Vec>& b);

struct ModeMetrics {
    std::vector<double> mass;  // fraction of samples assigned to each mode
    int covered = 0;           // modes with mass >= threshold
};

ModeMetrics mode_metrics(const std::vector<Vec>& samples, const DataSpec& data,
                         double threshold = 0.02);

struct GradCheckResult {
    double max_rel_err = 0.0;
    int argmax_index = -1;
    bool cancellation_warning = false;  // step outside [1e-6, 1e-3]
};

// Central finite differences against an analytic gradient. All coordinates
// are checked when there are at most max_coords of them, otherwise a random
// subset. Relative error uses max(1e-8, |analytic|, |numeric|).
GradCheckResult gradcheck(const std::function<double(std::span<const double>)>& loss,
                          const std::function<void(std::span<const double>, std::span<double>)>& analytic_grad,
                          std::vector<double> params, double step, int max_coords = 256,
                          uint64_t seed = 0);

// Flags reward-up/quality-down decorrelation: the first epoch starting a run
// of `window` consecutive epochs whose trailing-window least-squares trends
// are positive for the reward and positive (worsening) for the FID curve.
std::optional<int> overopt_monitor(std::span<const double> reward_curve,
                                   std::span<const double> fid_curve, int window);

}  // namespace diffrl
