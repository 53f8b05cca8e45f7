// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "diffrl/teacher.hpp"

namespace diffrl {

enum class CoarseStrategy { uniform, quadratic };

// Coarse timestep grid tau_K = T > tau_{K-1} > ... > tau_0 = 0, stored
// descending: taus[0] = T, taus[K] = 0. Student step k transitions from
// taus[k] to taus[k+1].
struct CoarseSchedule {
    int steps = 0;  // K
    std::vector<int> taus;
    CoarseStrategy strategy = CoarseStrategy::uniform;
};

CoarseSchedule build_coarse_schedule(int fine_steps, int coarse_steps, CoarseStrategy strategy);

// Degenerate one-teacher-step-per-transition grid (K = T). Not a valid
// argument for distillation configs; used by verification paths that need
// the coarse process to coincide with the fine one.
CoarseSchedule full_coarse_schedule(int fine_steps);

struct TransitionDistribution {
    Vec mean;
    double stddev = 0.0;
};

// Few-step Gaussian transition policy.
//
// The transition mean is parameterized around the teacher's interval
// composition: composing the teacher posterior means across [tau_{k+1},
// tau_k] while holding the clean-sample prediction fixed at its value at the
// interval start collapses to an affine map
//   mean = skip_x[k] * x + skip_eps[k] * net(x, tau_k, step, condition),
// so copying the teacher weights into the mean network reproduces one
// aggregated teacher step, and a zero output layer yields the bare skip
// pathway. Per-step scalar standard deviations exp(log_stds[k]) are clamped
// to [1e-4, 10] at use.
struct StudentPolicy {
    int data_dim = 0;
    int cond_dim = 0;  // one-hot width of the condition input (0 = unconditional net)
    NoiseSchedule schedule;
    CoarseSchedule coarse;
    Denoiser net;  // extra inputs: [step one-hot (K), condition one-hot (cond_dim)]
    std::vector<double> log_stds;
    std::vector<double> skip_x;
    std::vector<double> skip_eps;

    double stddev(int step_index) const;

    // Flat parameter vector [net params..., log_stds...] used by the
    // optimizer and by gradient checking.
    int param_count() const;
    std::vector<double> flat_params() const;
    void set_flat_params(std::span<const double> flat);
};

TransitionDistribution transition(const StudentPolicy& policy, const Vec& x, int step_index,
                                  std::optional<int> condition);

// Diagonal Gaussian log-density of x_next under the transition distribution.
double log_prob(const TransitionDistribution& dist, const Vec& x_next);

// Samples one episode: x ~ N(0, I) at tau_K, then K recorded transitions.
Trajectory rollout(const StudentPolicy& policy, std::optional<int> condition, uint64_t seed);

// Behavior cloning: copies the teacher weights into the mean network (extra
// input columns zeroed) and sets log_stds from the aggregated teacher
// posterior variance of each coarse interval.
StudentPolicy init_from_teacher(const Denoiser& teacher, const NoiseSchedule& schedule,
                                const CoarseSchedule& coarse, int cond_dim);

// Same architecture and schedule-derived log_stds, random mean network.
StudentPolicy random_student(const Denoiser& teacher, const NoiseSchedule& schedule,
                             const CoarseSchedule& coarse, int cond_dim, uint64_t seed);

// Aggregated interval coefficients used by the policy parameterization and
// by the truncated-teacher baseline: iterating the teacher posterior mean
// with a frozen clean-sample prediction gives
//   m = state_coef * x + x0_coef * x0_hat,   var = accumulated variance.
struct IntervalCoefs {
    double state_coef = 1.0;  // product of per-step x coefficients
    double x0_coef = 0.0;
    double variance = 0.0;
};
IntervalCoefs compose_interval(const NoiseSchedule& schedule, int t_hi, int t_lo);

}  // namespace diffrl
