// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include "diffrl/student.hpp"

#include <algorithm>
#include <cmath>

namespace diffrl {

namespace {
constexpr double kStdFloor = 1e-4;
constexpr double kStdCeil = 10.0;
}  // namespace

CoarseSchedule build_coarse_schedule(int fine_steps, int coarse_steps, CoarseStrategy strategy) {
    if (coarse_steps < 1 || coarse_steps >= fine_steps) {
        throw std::invalid_argument("coarse schedule requires 1 <= K < T");
    }
    CoarseSchedule c;
    c.steps = coarse_steps;
    c.strategy = strategy;
    c.taus.resize(static_cast<size_t>(coarse_steps) + 1);
    for (int j = 0; j <= coarse_steps; ++j) {
        // j counts from the noisy end: j = 0 -> tau = T, j = K -> tau = 0.
        const double frac = static_cast<double>(coarse_steps - j) / coarse_steps;
        double tau;
        if (strategy == CoarseStrategy::uniform) {
            tau = fine_steps * frac;
        } else {
            tau = fine_steps * frac * frac;
        }
        c.taus[static_cast<size_t>(j)] = static_cast<int>(std::lround(tau));
    }
    c.taus.front() = fine_steps;
    c.taus.back() = 0;
    for (size_t j = 1; j < c.taus.size(); ++j) {
        if (c.taus[j] >= c.taus[j - 1]) {
            throw std::invalid_argument("coarse schedule has duplicate timesteps after rounding");
        }
    }
    return c;
}

CoarseSchedule full_coarse_schedule(int fine_steps) {
    if (fine_steps < 1) throw std::invalid_argument("full_coarse_schedule: T must be positive");
    CoarseSchedule c;
    c.steps = fine_steps;
    c.strategy = CoarseStrategy::uniform;
    c.taus.resize(static_cast<size_t>(fine_steps) + 1);
    for (int j = 0; j <= fine_steps; ++j) c.taus[static_cast<size_t>(j)] = fine_steps - j;
    return c;
}

IntervalCoefs compose_interval(const NoiseSchedule& schedule, int t_hi, int t_lo) {
    if (!(t_hi > t_lo && t_lo >= 0)) throw std::invalid_argument("compose_interval: need t_hi > t_lo >= 0");
    schedule.validate_t(t_hi);
    IntervalCoefs c;
    for (int t = t_hi; t > t_lo; --t) {
        const double cx = schedule.posterior_x_coef(t);
        const double c0 = schedule.posterior_x0_coef(t);
        c.x0_coef = c0 + cx * c.x0_coef;
        c.state_coef *= cx;
        c.variance = cx * cx * c.variance + schedule.posterior_variance(t);
    }
    return c;
}

double StudentPolicy::stddev(int step_index) const {
    const double s = std::exp(log_stds.at(static_cast<size_t>(step_index)));
    return std::clamp(s, kStdFloor, kStdCeil);
}

int StudentPolicy::param_count() const {
    return net.param_count() + static_cast<int>(log_stds.size());
}

std::vector<double> StudentPolicy::flat_params() const {
    std::vector<double> flat = net.net.params();
    flat.insert(flat.end(), log_stds.begin(), log_stds.end());
    return flat;
}

void StudentPolicy::set_flat_params(std::span<const double> flat) {
    if (static_cast<int>(flat.size()) != param_count()) {
        throw std::invalid_argument("StudentPolicy: flat parameter size mismatch");
    }
    std::copy(flat.begin(), flat.begin() + net.param_count(), net.net.params().begin());
    std::copy(flat.begin() + net.param_count(), flat.end(), log_stds.begin());
}

namespace {

Vec student_extra(const StudentPolicy& policy, int step_index, std::optional<int> condition) {
    Vec extra(static_cast<size_t>(policy.coarse.steps + policy.cond_dim), 0.0);
    extra[static_cast<size_t>(step_index)] = 1.0;
    if (condition) {
        if (*condition < 0 || *condition >= policy.cond_dim) {
            throw std::invalid_argument("condition id " + std::to_string(*condition) + " out of range");
        }
        extra[static_cast<size_t>(policy.coarse.steps + *condition)] = 1.0;
    }
    return extra;
}

}  // namespace

TransitionDistribution transition(const StudentPolicy& policy, const Vec& x, int step_index,
                                  std::optional<int> condition) {
    if (step_index < 0 || step_index >= policy.coarse.steps) {
        throw std::invalid_argument("transition: step index out of range");
    }
    const int tau_hi = policy.coarse.taus[static_cast<size_t>(step_index)];
    const Vec extra = student_extra(policy, step_index, condition);
    const Vec eps = policy.net.predict(x, tau_hi, extra);
    if (!all_finite(eps)) throw std::runtime_error("transition: non-finite network output");

    TransitionDistribution dist;
    dist.mean.resize(x.size());
    const double sx = policy.skip_x[static_cast<size_t>(step_index)];
    const double se = policy.skip_eps[static_cast<size_t>(step_index)];
    for (size_t i = 0; i < x.size(); ++i) dist.mean[i] = sx * x[i] + se * eps[i];
    dist.stddev = policy.stddev(step_index);
    return dist;
}

double log_prob(const TransitionDistribution& dist, const Vec& x_next) {
    return gaussian_logpdf(x_next, dist.mean, dist.stddev);
}

Trajectory rollout(const StudentPolicy& policy, std::optional<int> condition, uint64_t seed) {
    Rng rng(seed);
    Trajectory traj;
    traj.seed = seed;
    traj.condition = condition;

    Vec x = rng.normal_vec(policy.data_dim);
    traj.states.push_back(x);
    traj.timesteps.push_back(policy.coarse.taus.front());
    for (int k = 0; k < policy.coarse.steps; ++k) {
        const TransitionDistribution dist = transition(policy, x, k, condition);
        const Vec noise = rng.normal_vec(policy.data_dim);
        for (size_t i = 0; i < x.size(); ++i) x[i] = dist.mean[i] + dist.stddev * noise[i];
        if (!all_finite(x)) {
            throw std::runtime_error("rollout: non-finite state at step " + std::to_string(k));
        }
        traj.step_logprobs.push_back(gaussian_logpdf(x, dist.mean, dist.stddev));
        traj.step_means.push_back(dist.mean);
        traj.step_stds.push_back(dist.stddev);
        traj.step_noises.push_back(noise);
        traj.states.push_back(x);
        traj.timesteps.push_back(policy.coarse.taus[static_cast<size_t>(k) + 1]);
    }
    return traj;
}

namespace {

// Fixed seed for the probe rollouts behind the log_std initialization so
// init_from_teacher stays a pure function of its inputs.
constexpr uint64_t kInitProbeSeed = 0xb0b5eed;
constexpr int kInitProbeCount = 64;

StudentPolicy make_student_shell(const Denoiser& teacher, const NoiseSchedule& schedule,
                                 const CoarseSchedule& coarse, int cond_dim) {
    if (coarse.taus.front() != schedule.steps) {
        throw std::invalid_argument("coarse schedule does not match the teacher horizon");
    }
    std::vector<int> hidden(teacher.net.widths().begin() + 1, teacher.net.widths().end() - 1);
    StudentPolicy s{
        .data_dim = teacher.data_dim,
        .cond_dim = cond_dim,
        .schedule = schedule,
        .coarse = coarse,
        .net = Denoiser(teacher.data_dim, teacher.time_features, coarse.steps + cond_dim, hidden,
                        teacher.net.activation()),
        .log_stds = {},
        .skip_x = {},
        .skip_eps = {},
    };
    s.log_stds.resize(static_cast<size_t>(coarse.steps));
    s.skip_x.resize(static_cast<size_t>(coarse.steps));
    s.skip_eps.resize(static_cast<size_t>(coarse.steps));
    for (int k = 0; k < coarse.steps; ++k) {
        const int hi = coarse.taus[static_cast<size_t>(k)];
        const int lo = coarse.taus[static_cast<size_t>(k) + 1];
        const IntervalCoefs c = compose_interval(schedule, hi, lo);
        const double abar = schedule.alpha_bar(hi);
        s.skip_x[static_cast<size_t>(k)] = c.state_coef + c.x0_coef / std::sqrt(abar);
        s.skip_eps[static_cast<size_t>(k)] = -c.x0_coef * std::sqrt(1.0 - abar) / std::sqrt(abar);
    }

    // log_stds from the aggregated teacher posterior variance of each
    // interval, averaged over probe states drawn from teacher rollouts.
    const auto probes = sample_reverse(teacher, schedule, kInitProbeCount, true, kInitProbeSeed);
    for (int k = 0; k < coarse.steps; ++k) {
        const int hi = coarse.taus[static_cast<size_t>(k)];
        const int lo = coarse.taus[static_cast<size_t>(k) + 1];
        double var_sum = 0.0;
        for (const Trajectory& traj : probes) {
            const Vec& x = traj.states[static_cast<size_t>(schedule.steps - hi)];
            const IntervalKernel kern = aligned_interval_kernel(teacher, schedule, x, hi, lo);
            for (double sd : kern.stddev) var_sum += sd * sd;
        }
        const double var_mean = var_sum / (kInitProbeCount * static_cast<double>(teacher.data_dim));
        const double ls = 0.5 * std::log(std::max(var_mean, 1e-12));
        s.log_stds[static_cast<size_t>(k)] = std::clamp(ls, std::log(kStdFloor), std::log(kStdCeil));
    }
    return s;
}

// Copies teacher weights into a student mean network whose first layer has
// extra trailing input columns; those columns are zeroed. Hidden and output
// layers must match exactly.
void copy_teacher_weights(const Denoiser& teacher, Denoiser& student) {
    const auto& tw = teacher.net.widths();
    const auto& sw = student.net.widths();
    if (tw.size() != sw.size()) throw std::invalid_argument("init_from_teacher: depth mismatch");
    for (size_t l = 1; l < tw.size(); ++l) {
        if (tw[l] != sw[l]) throw std::invalid_argument("init_from_teacher: width mismatch at layer " + std::to_string(l));
    }
    if (sw[0] < tw[0]) throw std::invalid_argument("init_from_teacher: student input narrower than teacher");

    const auto& tp = teacher.net.params();
    auto& sp = student.net.params();
    std::fill(sp.begin(), sp.end(), 0.0);

    // First layer: teacher columns land in the leading input slots.
    const int t_in = tw[0], s_in = sw[0], out0 = tw[1];
    for (int o = 0; o < out0; ++o) {
        for (int i = 0; i < t_in; ++i) {
            sp[static_cast<size_t>(o) * s_in + i] = tp[static_cast<size_t>(o) * t_in + i];
        }
    }
    size_t t_off = static_cast<size_t>(t_in) * out0;
    size_t s_off = static_cast<size_t>(s_in) * out0;
    // First-layer biases and every later layer are identical blocks.
    const size_t rest = tp.size() - t_off;
    for (size_t i = 0; i < rest; ++i) sp[s_off + i] = tp[t_off + i];
}

}  // namespace

StudentPolicy init_from_teacher(const Denoiser& teacher, const NoiseSchedule& schedule,
                                const CoarseSchedule& coarse, int cond_dim) {
    StudentPolicy s = make_student_shell(teacher, schedule, coarse, cond_dim);
    copy_teacher_weights(teacher, s.net);
    return s;
}

StudentPolicy random_student(const Denoiser& teacher, const NoiseSchedule& schedule,
                             const CoarseSchedule& coarse, int cond_dim, uint64_t seed) {
    StudentPolicy s = make_student_shell(teacher, schedule, coarse, cond_dim);
    Rng rng(seed, 0x5a11);
    s.net.net.init_random(rng);
    return s;
}

}  // namespace diffrl
