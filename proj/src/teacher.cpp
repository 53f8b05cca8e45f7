// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include "diffrl/teacher.hpp"

#include <cmath>

namespace diffrl {

void Trajectory::check_invariants() const {
    if (states.size() != timesteps.size() || states.size() != step_logprobs.size() + 1) {
        throw std::runtime_error("Trajectory: length contract violated");
    }
    for (size_t i = 1; i < timesteps.size(); ++i) {
        if (timesteps[i] >= timesteps[i - 1]) {
            throw std::runtime_error("Trajectory: timesteps must be strictly decreasing");
        }
    }
    if (!timesteps.empty() && timesteps.back() != 0) {
        throw std::runtime_error("Trajectory: last timestep must be 0");
    }
}

double gaussian_logpdf(const Vec& x, const Vec& mean, double stddev) {
    if (x.size() != mean.size()) throw std::invalid_argument("gaussian_logpdf: dim mismatch");
    if (!(stddev > 0.0)) throw std::invalid_argument("gaussian_logpdf: stddev must be positive");
    const double d = static_cast<double>(x.size());
    double q = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double r = x[i] - mean[i];
        q += r * r;
    }
    return -0.5 * d * std::log(2.0 * M_PI) - d * std::log(stddev) - 0.5 * q / (stddev * stddev);
}

Vec posterior_mean(const Denoiser& net, const NoiseSchedule& schedule, const Vec& x, int t) {
    const Vec eps = net.predict(x, t);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha(t));
    const double eps_coef = schedule.beta(t) / std::sqrt(1.0 - schedule.alpha_bar(t));
    Vec mu(x.size());
    for (size_t i = 0; i < x.size(); ++i) mu[i] = inv_sqrt_alpha * (x[i] - eps_coef * eps[i]);
    return mu;
}

double TrainStats::initial_window_mean() const {
    const size_t w = std::max<size_t>(1, losses.size() / 10);
    double s = 0.0;
    for (size_t i = 0; i < w; ++i) s += losses[i];
    return s / static_cast<double>(w);
}

double TrainStats::final_window_mean() const {
    const size_t w = std::max<size_t>(1, losses.size() / 10);
    double s = 0.0;
    for (size_t i = losses.size() - w; i < losses.size(); ++i) s += losses[i];
    return s / static_cast<double>(w);
}

Denoiser train_teacher(const DataSpec& data, const NoiseSchedule& schedule, Denoiser net,
                       const TeacherTrainConfig& config, uint64_t seed, TrainStats* stats) {
    if (net.data_dim != data.dim) throw std::invalid_argument("train_teacher: network/data dim mismatch");
    if (config.steps < 0 || config.batch_size < 1) {
        throw std::invalid_argument("train_teacher: invalid steps or batch size");
    }
    Rng rng(seed, 0x7e4c);
    AdamOptimizer adam(net.param_count(), config.lr);
    std::vector<double> grad(static_cast<size_t>(net.param_count()));
    Vec dout(static_cast<size_t>(net.data_dim));
    Mlp::Tape tape;

    const double grad_scale = 1.0 / (static_cast<double>(config.batch_size) * net.data_dim);
    for (int step = 0; step < config.steps; ++step) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (int b = 0; b < config.batch_size; ++b) {
            const Vec x0 = data.sample(rng);
            const int t = rng.uniform_int(1, schedule.steps);
            const Vec eps = rng.normal_vec(net.data_dim);
            const Vec xt = forward_marginal(schedule, x0, t, eps);
            const Vec eps_hat = net.predict(xt, t, {}, tape);
            for (int i = 0; i < net.data_dim; ++i) {
                const double r = eps_hat[static_cast<size_t>(i)] - eps[static_cast<size_t>(i)];
                loss += r * r;
                dout[static_cast<size_t>(i)] = 2.0 * r * grad_scale;
            }
            net.net.backward(tape, dout, grad);
        }
        loss *= grad_scale;
        if (!std::isfinite(loss)) {
            throw std::runtime_error("train_teacher: non-finite loss at step " + std::to_string(step));
        }
        if (stats) stats->losses.push_back(loss);
        adam.step(net.net.params(), grad);
    }
    return net;
}

namespace {

Trajectory sample_one(const Denoiser& net, const NoiseSchedule& schedule, bool record, Rng rng,
                      uint64_t stream_seed) {
    const int d = net.data_dim;
    Vec x = rng.normal_vec(d);
    Trajectory traj;
    traj.seed = stream_seed;
    if (record) {
        traj.states.push_back(x);
        traj.timesteps.push_back(schedule.steps);
    }
    for (int t = schedule.steps; t >= 1; --t) {
        const Vec mu = posterior_mean(net, schedule, x, t);
        const double stddev = std::sqrt(schedule.posterior_variance(t));
        const Vec noise = rng.normal_vec(d);
        for (int i = 0; i < d; ++i) x[static_cast<size_t>(i)] = mu[static_cast<size_t>(i)] + stddev * noise[static_cast<size_t>(i)];
        if (!all_finite(x)) {
            throw std::runtime_error("sample_reverse: non-finite state at t=" + std::to_string(t));
        }
        if (record) {
            traj.step_logprobs.push_back(gaussian_logpdf(x, mu, stddev));
            traj.step_means.push_back(mu);
            traj.step_stds.push_back(stddev);
            traj.step_noises.push_back(noise);
            traj.states.push_back(x);
            traj.timesteps.push_back(t - 1);
        }
    }
    if (!record) {
        traj.states.push_back(x);
        traj.timesteps.push_back(0);
    }
    return traj;
}

}  // namespace

std::vector<Trajectory> sample_reverse(const Denoiser& net, const NoiseSchedule& schedule, int n,
                                       bool record, uint64_t seed) {
    if (n <= 0) throw std::invalid_argument("sample_reverse: n must be positive");
    std::vector<Trajectory> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const uint64_t stream = mix_seed(seed, static_cast<uint64_t>(i));
        out.push_back(sample_one(net, schedule, record, Rng(stream), stream));
    }
    return out;
}

IntervalKernel aligned_interval_kernel(const Denoiser& net, const NoiseSchedule& schedule,
                                       const Vec& x, int t_hi, int t_lo) {
    if (!(t_hi > t_lo && t_lo >= 0)) {
        throw std::invalid_argument("aligned_interval_kernel: need t_hi > t_lo >= 0");
    }
    schedule.validate_t(t_hi);
    const int d = net.data_dim;
    Vec m = x;
    std::vector<double> cov(static_cast<size_t>(d) * d, 0.0);
    std::vector<double> jac(static_cast<size_t>(d) * d);
    std::vector<double> tmp(static_cast<size_t>(d) * d);
    for (int t = t_hi; t > t_lo; --t) {
        const std::vector<double> jeps = net.jacobian_x(m, t);
        const double k = schedule.beta(t) / std::sqrt(1.0 - schedule.alpha_bar(t));
        const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha(t));
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                const double eye = i == j ? 1.0 : 0.0;
                jac[static_cast<size_t>(i) * d + j] =
                    inv_sqrt_alpha * (eye - k * jeps[static_cast<size_t>(i) * d + j]);
            }
        }
        // cov <- J cov J^T + posterior_variance(t) I
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int l = 0; l < d; ++l) s += jac[static_cast<size_t>(i) * d + l] * cov[static_cast<size_t>(l) * d + j];
                tmp[static_cast<size_t>(i) * d + j] = s;
            }
        }
        const double var_t = schedule.posterior_variance(t);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int l = 0; l < d; ++l) s += tmp[static_cast<size_t>(i) * d + l] * jac[static_cast<size_t>(j) * d + l];
                cov[static_cast<size_t>(i) * d + j] = s + (i == j ? var_t : 0.0);
            }
        }
        m = posterior_mean(net, schedule, m, t);
        if (!all_finite(m)) {
            throw std::runtime_error("aligned_interval_kernel: non-finite mean at t=" + std::to_string(t));
        }
    }
    IntervalKernel out;
    out.mean = std::move(m);
    out.stddev.resize(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        out.stddev[static_cast<size_t>(i)] = std::sqrt(std::max(cov[static_cast<size_t>(i) * d + i], 1e-12));
    }
    return out;
}

Vec sample_reverse_from(const Denoiser& net, const NoiseSchedule& schedule, const Vec& x_start,
                        Rng& rng) {
    Vec x = x_start;
    for (int t = schedule.steps; t >= 1; --t) {
        const Vec mu = posterior_mean(net, schedule, x, t);
        const double stddev = std::sqrt(schedule.posterior_variance(t));
        for (size_t i = 0; i < x.size(); ++i) x[i] = mu[i] + stddev * rng.normal();
        if (!all_finite(x)) {
            throw std::runtime_error("sample_reverse_from: non-finite state at t=" + std::to_string(t));
        }
    }
    return x;
}

}  // namespace diffrl
