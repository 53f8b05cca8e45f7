// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include "diffrl/schedule.hpp"

#include <algorithm>
#include <cmath>

namespace diffrl {

namespace {
constexpr double kPosteriorVarianceFloor = 1e-12;
}

void NoiseSchedule::validate_t(int t) const {
    if (t < 1 || t > steps) {
        throw std::invalid_argument("timestep " + std::to_string(t) + " outside [1, " +
                                    std::to_string(steps) + "]");
    }
}

double NoiseSchedule::posterior_variance(int t) const {
    validate_t(t);
    const double v = beta(t) * (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t));
    return std::max(v, kPosteriorVarianceFloor);
}

double NoiseSchedule::posterior_x0_coef(int t) const {
    validate_t(t);
    return std::sqrt(alpha_bar(t - 1)) * beta(t) / (1.0 - alpha_bar(t));
}

double NoiseSchedule::posterior_x_coef(int t) const {
    validate_t(t);
    return std::sqrt(alpha(t)) * (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t));
}

NoiseSchedule build_schedule(ScheduleKind kind, int steps, double beta_min, double beta_max) {
    if (steps < 2) {
        throw std::invalid_argument("schedule needs at least 2 steps, got " +
                                    std::to_string(steps));
    }
    if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0)) {
        throw std::invalid_argument("beta range must satisfy 0 < beta_min <= beta_max < 1");
    }

    NoiseSchedule s;
    s.kind = kind;
    s.steps = steps;
    s.beta_min = beta_min;
    s.beta_max = beta_max;
    s.betas.resize(static_cast<size_t>(steps));

    if (kind == ScheduleKind::linear) {
        for (int t = 1; t <= steps; ++t) {
            const double frac = static_cast<double>(t - 1) / static_cast<double>(steps - 1);
            s.betas[static_cast<size_t>(t - 1)] = beta_min + (beta_max - beta_min) * frac;
        }
    } else {
        // Squared-cosine alpha_bar profile with the usual small offset.
        const double offset = 0.008;
        auto f = [&](double u) {
            const double c = std::cos((u + offset) / (1.0 + offset) * M_PI / 2.0);
            return c * c;
        };
        const double f0 = f(0.0);
        double prev_bar = 1.0;
        for (int t = 1; t <= steps; ++t) {
            const double bar = f(static_cast<double>(t) / steps) / f0;
            double bt = 1.0 - bar / prev_bar;
            bt = std::clamp(bt, beta_min, beta_max);
            s.betas[static_cast<size_t>(t - 1)] = bt;
            prev_bar *= (1.0 - bt);
        }
    }

    s.alphas.resize(s.betas.size());
    s.alpha_bars.resize(s.betas.size());
    double bar = 1.0;
    for (size_t i = 0; i < s.betas.size(); ++i) {
        const double b = s.betas[i];
        if (!(b > 0.0 && b < 1.0)) {
            throw std::invalid_argument("beta_" + std::to_string(i + 1) + " outside (0,1)");
        }
        s.alphas[i] = 1.0 - b;
        bar *= s.alphas[i];
        s.alpha_bars[i] = bar;
    }
    return s;
}

Vec forward_marginal(const NoiseSchedule& schedule, const Vec& x0, int t, const Vec& noise) {
    schedule.validate_t(t);
    if (noise.size() != x0.size()) throw std::invalid_argument("noise dim mismatch");
    const double a = std::sqrt(schedule.alpha_bar(t));
    const double b = std::sqrt(1.0 - schedule.alpha_bar(t));
    Vec out(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * noise[i];
    return out;
}

}  // namespace diffrl
