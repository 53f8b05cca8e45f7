// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "diffrl/checkpoint.hpp"
#include "diffrl/teacher.hpp"

using namespace diffrl;

namespace {

NoiseSchedule small_schedule() { return build_schedule(ScheduleKind::linear, 12, 0.02, 0.3); }

Denoiser small_net(uint64_t seed = 21) {
    return make_teacher_net(2, {16, 16}, 4, Activation::tanh_act, seed);
}

}  // namespace

TEST_SUITE_BEGIN("teacher");

TEST_CASE("gaussian logpdf standard value") {
    // -0.5*ln(2*pi)
    CHECK(gaussian_logpdf({0.0}, {0.0}, 1.0) == doctest::Approx(-0.9189385).epsilon(1e-7));
    CHECK_THROWS_AS(gaussian_logpdf({0.0}, {0.0}, 0.0), std::invalid_argument);
}

TEST_CASE("train_teacher no-op and determinism") {
    const DataSpec data = DataSpec::gmm_ring(4, 2.0, 0.2);
    const NoiseSchedule schedule = small_schedule();

    Denoiser net = small_net();
    const std::vector<double> before = net.net.params();
    const Denoiser after0 = train_teacher(data, schedule, net, {0, 8, 1e-3}, 5);
    CHECK(after0.net.params() == before);

    const Denoiser a = train_teacher(data, schedule, net, {40, 16, 1e-3}, 5);
    const Denoiser b = train_teacher(data, schedule, net, {40, 16, 1e-3}, 5);
    CHECK(a.net.params() == b.net.params());
    const Denoiser c = train_teacher(data, schedule, net, {40, 16, 1e-3}, 6);
    CHECK(a.net.params() != c.net.params());
}

TEST_CASE("train_teacher reduces the loss") {
    const DataSpec data = DataSpec::gmm_ring(4, 2.0, 0.2);
    const NoiseSchedule schedule = small_schedule();
    TrainStats stats;
    train_teacher(data, schedule, small_net(), {1500, 32, 2e-3}, 7, &stats);
    CHECK(stats.losses.size() == 1500);
    CHECK(stats.final_window_mean() < stats.initial_window_mean());
}

TEST_CASE("train_teacher aborts on non-finite loss naming the step") {
    const DataSpec data = DataSpec::gmm_ring(4, 2.0, 0.2);
    const NoiseSchedule schedule = small_schedule();
    Denoiser net = small_net();
    net.net.params()[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(train_teacher(data, schedule, net, {5, 8, 1e-3}, 5),
                         doctest::Contains("step 0"), std::runtime_error);
}

TEST_CASE("sample_reverse record mode invariants") {
    const NoiseSchedule schedule = small_schedule();
    const Denoiser net = small_net();

    CHECK_THROWS_AS(sample_reverse(net, schedule, 0, true, 1), std::invalid_argument);

    const auto trajs = sample_reverse(net, schedule, 3, true, 99);
    for (const Trajectory& t : trajs) {
        t.check_invariants();
        CHECK(t.states.size() == 13);
        CHECK(t.step_logprobs.size() == 12);
        CHECK(t.timesteps.front() == 12);
        CHECK(t.timesteps.back() == 0);
    }

    const auto finals_only = sample_reverse(net, schedule, 3, false, 99);
    for (size_t i = 0; i < finals_only.size(); ++i) {
        finals_only[i].check_invariants();
        CHECK(finals_only[i].states.size() == 1);
        CHECK(finals_only[i].step_logprobs.empty());
        // memory mode carries the same final state
        CHECK(finals_only[i].final_state() == trajs[i].final_state());
    }
}

TEST_CASE("recorded logprobs equal the analytic density") {
    const NoiseSchedule schedule = small_schedule();
    const Denoiser net = small_net();
    const auto trajs = sample_reverse(net, schedule, 2, true, 5);
    for (const Trajectory& t : trajs) {
        for (size_t k = 0; k < t.step_logprobs.size(); ++k) {
            const double analytic = gaussian_logpdf(t.states[k + 1], t.step_means[k], t.step_stds[k]);
            CHECK(std::abs(std::exp(t.step_logprobs[k]) - std::exp(analytic)) < 1e-10);
        }
    }
}

TEST_CASE("reparameterization replays the stored transition bit-exactly") {
    const NoiseSchedule schedule = small_schedule();
    const Denoiser net = small_net();
    const auto trajs = sample_reverse(net, schedule, 2, true, 31);
    for (const Trajectory& t : trajs) {
        for (size_t k = 0; k < t.step_noises.size(); ++k) {
            for (size_t i = 0; i < t.states[k + 1].size(); ++i) {
                const double replay = t.step_means[k][i] + t.step_stds[k] * t.step_noises[k][i];
                CHECK(replay == t.states[k + 1][i]);
            }
        }
    }
}

TEST_CASE("sample_reverse is seed-deterministic") {
    const NoiseSchedule schedule = small_schedule();
    const Denoiser net = small_net();
    const auto a = sample_reverse(net, schedule, 2, true, 7);
    const auto b = sample_reverse(net, schedule, 2, true, 7);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].states == b[i].states);
        CHECK(a[i].step_logprobs == b[i].step_logprobs);
    }
}

TEST_CASE("teacher checkpoint round-trip is bit-exact") {
    const NoiseSchedule schedule = small_schedule();
    const DataSpec data = DataSpec::gmm_ring(4, 2.0, 0.2);
    const Denoiser net = train_teacher(data, schedule, small_net(), {60, 16, 1e-3}, 9);
    const std::string path = "teacher_roundtrip.ckpt";
    save_teacher(path, net, schedule, 9);
    const TeacherCheckpoint loaded = load_teacher(path);
    CHECK(loaded.net.net.params() == net.net.params());
    CHECK(loaded.net.net.widths() == net.net.widths());
    CHECK(loaded.schedule.betas == schedule.betas);
    CHECK(loaded.seed == 9);
    CHECK_THROWS_AS(load_student(path), std::runtime_error);  // wrong kind
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_teacher(path), std::runtime_error);  // missing file
}

TEST_CASE("aligned interval kernel degenerates to the single-step transition") {
    const NoiseSchedule schedule = small_schedule();
    const Denoiser net = small_net();
    const Vec x = {0.4, -0.9};
    const int t = 8;
    const IntervalKernel kern = aligned_interval_kernel(net, schedule, x, t, t - 1);
    const Vec mu = posterior_mean(net, schedule, x, t);
    const double sd = std::sqrt(schedule.posterior_variance(t));
    for (size_t i = 0; i < 2; ++i) {
        CHECK(kern.mean[i] == doctest::Approx(mu[i]).epsilon(1e-14));
        CHECK(kern.stddev[i] == doctest::Approx(sd).epsilon(1e-12));
    }
    CHECK_THROWS_AS(aligned_interval_kernel(net, schedule, x, 3, 5), std::invalid_argument);
}

TEST_SUITE_END();
