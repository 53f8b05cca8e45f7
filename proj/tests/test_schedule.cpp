// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "diffrl/rng.hpp"
#include "diffrl/schedule.hpp"

using namespace diffrl;

TEST_SUITE_BEGIN("schedule");

TEST_CASE("linear schedule hand values") {
    const NoiseSchedule s = build_schedule(ScheduleKind::linear, 2, 0.1, 0.1);
    CHECK(s.beta(1) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(s.beta(2) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-15));
    // hand product: 0.9 * 0.9
    CHECK(s.alpha_bar(2) == doctest::Approx(0.81).epsilon(1e-15));
}

TEST_CASE("standard 1000-step schedule tail") {
    const NoiseSchedule s = build_schedule(ScheduleKind::linear, 1000, 1e-4, 0.02);
    // independent product oracle
    double bar = 1.0;
    for (int t = 1; t <= 1000; ++t) {
        bar *= 1.0 - (1e-4 + (0.02 - 1e-4) * (t - 1) / 999.0);
    }
    CHECK(s.alpha_bar(1000) == doctest::Approx(bar).epsilon(1e-12));
    CHECK(s.alpha_bar(1000) < 0.01);
    for (int t = 2; t <= 1000; ++t) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    CHECK(s.alpha_bar(1000) < s.alpha_bar(1));
    CHECK(s.alpha_bar(1) < 1.0);
}

TEST_CASE("schedule validation") {
    CHECK_THROWS_AS(build_schedule(ScheduleKind::linear, 1, 0.1, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(ScheduleKind::linear, 10, 0.1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(ScheduleKind::linear, 10, 0.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(ScheduleKind::linear, 10, 0.3, 0.2), std::invalid_argument);
}

TEST_CASE("alpha_bar ratio identity") {
    for (ScheduleKind kind : {ScheduleKind::linear, ScheduleKind::cosine}) {
        const NoiseSchedule s = build_schedule(kind, 50, 0.002, 0.4);
        for (int t = 1; t <= 50; ++t) {
            CHECK(s.alpha_bar(t) / s.alpha_bar(t - 1) == doctest::Approx(s.alpha(t)).epsilon(1e-12));
            CHECK(s.beta(t) > 0.0);
            CHECK(s.beta(t) < 1.0);
            CHECK(s.alpha(t) == 1.0 - s.beta(t));
        }
    }
}

TEST_CASE("forward marginal hand value") {
    const NoiseSchedule s = build_schedule(ScheduleKind::linear, 2, 0.1, 0.1);
    const Vec out = forward_marginal(s, {1.0, 0.0}, 2, {0.0, 0.0});
    CHECK(out[0] == doctest::Approx(0.9).epsilon(1e-15));  // sqrt(0.81)
    CHECK(out[1] == 0.0);
}

TEST_CASE("forward marginal no-corruption limit") {
    const NoiseSchedule s = build_schedule(ScheduleKind::linear, 1000, 1e-4, 0.02);
    const Vec out = forward_marginal(s, {2.0, -3.0}, 1, {0.0, 0.0});
    CHECK(out[0] == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(out[1] == doctest::Approx(-3.0).epsilon(1e-4));
    CHECK_THROWS_AS(forward_marginal(s, {1.0}, 0, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(forward_marginal(s, {1.0}, 1001, {0.0}), std::invalid_argument);
}

TEST_CASE("forward marginal monte-carlo variance") {
    const NoiseSchedule s = build_schedule(ScheduleKind::linear, 50, 0.002, 0.4);
    const int t = 20;
    const Vec x0 = {1.5, -0.5};
    Rng rng(12);
    const int n = 100000;
    double mean0 = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const Vec x = forward_marginal(s, x0, t, rng.normal_vec(2));
        mean0 += x[0];
        m2 += x[0] * x[0];
    }
    mean0 /= n;
    const double var = m2 / n - mean0 * mean0;
    CHECK(var == doctest::Approx(1.0 - s.alpha_bar(t)).epsilon(0.02));
    CHECK(mean0 == doctest::Approx(std::sqrt(s.alpha_bar(t)) * x0[0]).epsilon(0.02));
}

TEST_CASE("marginal consistency with composed single steps") {
    const NoiseSchedule s = build_schedule(ScheduleKind::linear, 50, 0.002, 0.4);
    const int t = 12;
    const Vec x0 = {2.0, 1.0};
    Rng rng(77);
    const int n = 100000;
    double mean0 = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        Vec x = x0;
        for (int step = 1; step <= t; ++step) {
            const double a = std::sqrt(s.alpha(step));
            const double b = std::sqrt(s.beta(step));
            for (double& v : x) v = a * v + b * rng.normal();
        }
        mean0 += x[0];
        m2 += x[0] * x[0];
    }
    mean0 /= n;
    const double var = m2 / n - mean0 * mean0;
    CHECK(mean0 == doctest::Approx(std::sqrt(s.alpha_bar(t)) * x0[0]).epsilon(0.02));
    CHECK(var == doctest::Approx(1.0 - s.alpha_bar(t)).epsilon(0.02));
}

TEST_CASE("posterior coefficients and variance floor") {
    const NoiseSchedule s = build_schedule(ScheduleKind::linear, 50, 0.002, 0.4);
    // t=1 posterior variance degenerates; floored to keep densities proper.
    CHECK(s.posterior_variance(1) == doctest::Approx(1e-12));
    for (int t = 2; t <= 50; ++t) {
        const double expected = s.beta(t) * (1.0 - s.alpha_bar(t - 1)) / (1.0 - s.alpha_bar(t));
        CHECK(s.posterior_variance(t) == doctest::Approx(expected).epsilon(1e-12));
        // identity: x0_coef/sqrt(abar_t) + x_coef == 1/sqrt(alpha_t)
        const double lhs = s.posterior_x0_coef(t) / std::sqrt(s.alpha_bar(t)) + s.posterior_x_coef(t);
        CHECK(lhs == doctest::Approx(1.0 / std::sqrt(s.alpha(t))).epsilon(1e-12));
    }
}

TEST_SUITE_END();
