// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>

#include "diffrl/data.hpp"
#include "diffrl/denoiser.hpp"
#include "diffrl/schedule.hpp"

namespace diffrl {

// One recorded denoising rollout. states/timesteps have one more entry than
// step_logprobs; timesteps are strictly decreasing and end at 0. When a
// sampler runs in memory mode (record = false) only the final state is kept.
// step_means/stds/noises hold the transition parameters actually sampled
// from, so any transition can be replayed exactly.
struct Trajectory {
    std::vector<Vec> states;
    std::vector<int> timesteps;
    std::vector<double> step_logprobs;
    std::vector<Vec> step_means;
    std::vector<double> step_stds;
    std::vector<Vec> step_noises;
    std::optional<int> condition;
    uint64_t seed = 0;

    const Vec& final_state() const { return states.back(); }
    void check_invariants() const;
};

// Diagonal Gaussian log-density with a shared scalar standard deviation.
double gaussian_logpdf(const Vec& x, const Vec& mean, double stddev);

// Teacher reverse-transition mean mu(x, t) from the noise prediction.
Vec posterior_mean(const Denoiser& net, const NoiseSchedule& schedule, const Vec& x, int t);

struct TeacherTrainConfig {
    int steps = 20000;
    int batch_size = 128;
    double lr = 1e-3;
};

struct TrainStats {
    std::vector<double> losses;
    // Mean loss over the first and last 10% of steps.
    double initial_window_mean() const;
    double final_window_mean() const;
};

// Trains the noise-prediction objective E||eps - eps_hat(x_t, t)||^2 with
// Adam on freshly sampled data. Pure function of (inputs, seed); steps = 0
// returns the network unchanged. Throws on non-finite loss, naming the step.
Denoiser train_teacher(const DataSpec& data, const NoiseSchedule& schedule, Denoiser net,
                       const TeacherTrainConfig& config, uint64_t seed,
                       TrainStats* stats = nullptr);

// Ancestral sampling with Gaussian transitions and recorded per-step
// log-densities. Each trajectory uses its own RNG stream derived from
// (seed, index), so results do not depend on evaluation order.
std::vector<Trajectory> sample_reverse(const Denoiser& net, const NoiseSchedule& schedule, int n,
                                       bool record, uint64_t seed);

// Single reverse rollout from a given start state x_T (shared-noise pairing
// with a student rollout); always records only when asked.
Vec sample_reverse_from(const Denoiser& net, const NoiseSchedule& schedule, const Vec& x_start,
                        Rng& rng);

// Gaussian approximation of the aggregated teacher kernel over [t_lo, t_hi]
// started at x. The mean iterates the posterior-mean map with the clean-
// sample prediction refreshed at every inner step; the covariance is carried
// through the local linearization V <- J V J^T + var(t) I of that map and
// reported per dimension.
struct IntervalKernel {
    Vec mean;
    Vec stddev;  // sqrt of the covariance diagonal
};
IntervalKernel aligned_interval_kernel(const Denoiser& net, const NoiseSchedule& schedule,
                                       const Vec& x, int t_hi, int t_lo);

}  // namespace diffrl
