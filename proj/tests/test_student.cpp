// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "diffrl/checkpoint.hpp"
#include "diffrl/student.hpp"

using namespace diffrl;

namespace {

NoiseSchedule small_schedule() { return build_schedule(ScheduleKind::linear, 12, 0.02, 0.3); }

Denoiser small_net(uint64_t seed = 21) {
    return make_teacher_net(2, {16, 16}, 4, Activation::tanh_act, seed);
}

}  // namespace

TEST_SUITE_BEGIN("student");

TEST_CASE("coarse schedule construction") {
    const CoarseSchedule c = build_coarse_schedule(50, 5, CoarseStrategy::uniform);
    CHECK(c.taus == std::vector<int>{50, 40, 30, 20, 10, 0});

    const CoarseSchedule one = build_coarse_schedule(50, 1, CoarseStrategy::uniform);
    CHECK(one.taus == std::vector<int>{50, 0});

    CHECK_THROWS_AS(build_coarse_schedule(5, 5, CoarseStrategy::uniform), std::invalid_argument);
    CHECK_THROWS_AS(build_coarse_schedule(5, 0, CoarseStrategy::uniform), std::invalid_argument);
    // quadratic rounding on a tiny horizon collides at 0
    CHECK_THROWS_AS(build_coarse_schedule(4, 3, CoarseStrategy::quadratic), std::invalid_argument);

    const CoarseSchedule q = build_coarse_schedule(50, 5, CoarseStrategy::quadratic);
    for (size_t j = 1; j < q.taus.size(); ++j) CHECK(q.taus[j] < q.taus[j - 1]);
    CHECK(q.taus.front() == 50);
    CHECK(q.taus.back() == 0);

    const CoarseSchedule full = full_coarse_schedule(4);
    CHECK(full.taus == std::vector<int>{4, 3, 2, 1, 0});
}

TEST_CASE("log_prob values") {
    TransitionDistribution d{{0.0}, 1.0};
    CHECK(log_prob(d, {0.0}) == doctest::Approx(-0.9189385).epsilon(1e-7));
    // mode is the maximizer
    CHECK(log_prob(d, {0.0}) > log_prob(d, {0.3}));
    CHECK(log_prob(d, {0.0}) > log_prob(d, {-0.1}));
    // doubling the std at the mean costs ln 2 per dimension
    TransitionDistribution wide{{0.0, 0.0}, 2.0};
    TransitionDistribution narrow{{0.0, 0.0}, 1.0};
    CHECK(log_prob(narrow, {0.0, 0.0}) - log_prob(wide, {0.0, 0.0}) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("log_prob integrates to one") {
    TransitionDistribution d{{0.3}, 0.7};
    const int n = 20001;
    const double lo = 0.3 - 10.0 * 0.7, hi = 0.3 + 10.0 * 0.7;
    const double h = (hi - lo) / (n - 1);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        sum += w * std::exp(log_prob(d, {lo + i * h}));
    }
    CHECK(sum * h == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("behavior cloning copies the teacher prediction") {
    const NoiseSchedule schedule = small_schedule();
    const Denoiser teacher = small_net();
    const CoarseSchedule coarse = build_coarse_schedule(12, 3, CoarseStrategy::uniform);
    const StudentPolicy s = init_from_teacher(teacher, schedule, coarse, 4);

    const Vec x = {0.8, -0.3};
    for (int k = 0; k < 3; ++k) {
        const int tau = coarse.taus[static_cast<size_t>(k)];
        Vec extra(static_cast<size_t>(3 + 4), 0.0);
        extra[static_cast<size_t>(k)] = 1.0;
        const Vec student_eps = s.net.predict(x, tau, extra);
        const Vec teacher_eps = teacher.predict(x, tau);
        CHECK(student_eps == teacher_eps);

        // transition mean is the frozen-prediction interval composition
        const TransitionDistribution dist = transition(s, x, k, std::nullopt);
        for (size_t i = 0; i < 2; ++i) {
            const double expect = s.skip_x[static_cast<size_t>(k)] * x[i] +
                                  s.skip_eps[static_cast<size_t>(k)] * teacher_eps[i];
            CHECK(dist.mean[i] == doctest::Approx(expect).epsilon(1e-14));
        }
    }
    for (double ls : s.log_stds) {
        CHECK(std::isfinite(ls));
        CHECK(std::exp(ls) >= 1e-4);
        CHECK(std::exp(ls) <= 10.0);
    }
}

TEST_CASE("zero output head leaves only the skip pathway") {
    const NoiseSchedule schedule = small_schedule();
    const Denoiser teacher = small_net();
    const CoarseSchedule coarse = build_coarse_schedule(12, 3, CoarseStrategy::uniform);
    StudentPolicy s = init_from_teacher(teacher, schedule, coarse, 0);
    s.net.net.zero_output_layer();
    const Vec x = {1.2, 0.4};
    const TransitionDistribution dist = transition(s, x, 1, std::nullopt);
    CHECK(dist.mean[0] == doctest::Approx(s.skip_x[1] * x[0]).epsilon(1e-15));
    CHECK(dist.mean[1] == doctest::Approx(s.skip_x[1] * x[1]).epsilon(1e-15));
}

TEST_CASE("transition is a pure function of (x, step, condition)") {
    const NoiseSchedule schedule = small_schedule();
    const StudentPolicy s = init_from_teacher(small_net(), schedule,
                                              build_coarse_schedule(12, 3, CoarseStrategy::uniform), 4);
    // Two different histories arriving at the same state must see the same
    // transition distribution.
    const Trajectory h1 = rollout(s, 2, 100);
    const Trajectory h2 = rollout(s, 2, 200);
    CHECK(h1.states[1] != h2.states[1]);
    const Vec meet = {0.25, -0.75};
    const TransitionDistribution a = transition(s, meet, 1, 2);
    const TransitionDistribution b = transition(s, meet, 1, 2);
    CHECK(a.mean == b.mean);
    CHECK(a.stddev == b.stddev);
    CHECK_THROWS_AS(transition(s, meet, 3, 2), std::invalid_argument);
    CHECK_THROWS_AS(transition(s, meet, 1, 9), std::invalid_argument);
}

TEST_CASE("rollout length, determinism and replay") {
    const NoiseSchedule schedule = small_schedule();
    const StudentPolicy s = init_from_teacher(small_net(), schedule,
                                              build_coarse_schedule(12, 5, CoarseStrategy::uniform), 4);
    const Trajectory t = rollout(s, 1, 4242);
    t.check_invariants();
    CHECK(t.states.size() == 6);
    CHECK(t.step_logprobs.size() == 5);
    CHECK(t.timesteps.front() == 12);
    CHECK(t.timesteps.back() == 0);

    const Trajectory u = rollout(s, 1, 4242);
    CHECK(t.states == u.states);
    CHECK(t.step_logprobs == u.step_logprobs);

    for (size_t k = 0; k < t.step_noises.size(); ++k) {
        for (size_t i = 0; i < 2; ++i) {
            CHECK(t.step_means[k][i] + t.step_stds[k] * t.step_noises[k][i] == t.states[k + 1][i]);
        }
    }
}

TEST_CASE("zero-mean unit-std policy has unit final variance") {
    const NoiseSchedule schedule = small_schedule();
    StudentPolicy s = init_from_teacher(small_net(), schedule,
                                        build_coarse_schedule(12, 4, CoarseStrategy::uniform), 0);
    // Freeze an all-zero-mean policy with std 1: every transition is x' = z,
    // so only the last step contributes and the final variance is exactly 1.
    std::fill(s.skip_x.begin(), s.skip_x.end(), 0.0);
    std::fill(s.skip_eps.begin(), s.skip_eps.end(), 0.0);
    std::fill(s.log_stds.begin(), s.log_stds.end(), 0.0);

    const int n = 10000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const Vec x = rollout(s, std::nullopt, mix_seed(9, i)).final_state();
        sum += x[0];
        sum2 += x[0] * x[0];
    }
    const double mean = sum / n;
    CHECK(sum2 / n - mean * mean == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("degenerate full schedule reproduces teacher moments") {
    const NoiseSchedule schedule = small_schedule();
    const DataSpec data = DataSpec::gmm_ring(4, 2.0, 0.2);
    Denoiser teacher = small_net();
    teacher = train_teacher(data, schedule, teacher, {1200, 32, 2e-3}, 3);

    const StudentPolicy s = init_from_teacher(teacher, schedule, full_coarse_schedule(12), 0);
    // n chosen so the 3% tolerance sits beyond 3 standard errors of the
    // Monte Carlo estimates.
    const int n = 32768;
    double ts1 = 0.0, ts2 = 0.0, ss1 = 0.0, ss2 = 0.0;
    const auto teacher_trajs = sample_reverse(teacher, schedule, n, false, 88);
    for (int i = 0; i < n; ++i) {
        const double tx = teacher_trajs[static_cast<size_t>(i)].final_state()[0];
        const double sx = rollout(s, std::nullopt, mix_seed(77, i)).final_state()[0];
        ts1 += tx;
        ts2 += tx * tx;
        ss1 += sx;
        ss2 += sx * sx;
    }
    const double tmean = ts1 / n, smean = ss1 / n;
    const double tvar = ts2 / n - tmean * tmean;
    const double svar = ss2 / n - smean * smean;
    // means hover near zero by ring symmetry; compare against the scale
    CHECK(std::abs(tmean - smean) < 0.03 * std::sqrt(tvar));
    CHECK(svar == doctest::Approx(tvar).epsilon(0.03));
}

TEST_CASE("student checkpoint round-trip is bit-exact") {
    const NoiseSchedule schedule = small_schedule();
    const StudentPolicy s = init_from_teacher(
        small_net(), schedule, build_coarse_schedule(12, 3, CoarseStrategy::uniform), 4);
    const std::string path = "student_roundtrip.ckpt";
    save_student(path, s, 123);
    const StudentPolicy loaded = load_student(path);
    CHECK(loaded.net.net.params() == s.net.net.params());
    CHECK(loaded.log_stds == s.log_stds);
    CHECK(loaded.coarse.taus == s.coarse.taus);
    CHECK(loaded.skip_x == s.skip_x);
    CHECK(loaded.skip_eps == s.skip_eps);
    const Trajectory a = rollout(s, 2, 31337);
    const Trajectory b = rollout(loaded, 2, 31337);
    CHECK(a.states == b.states);
    std::remove(path.c_str());
}

TEST_CASE("interval composition identity") {
    const NoiseSchedule schedule = small_schedule();
    // A single-step interval must reduce to the raw posterior coefficients.
    const IntervalCoefs c = compose_interval(schedule, 7, 6);
    CHECK(c.x0_coef == doctest::Approx(schedule.posterior_x0_coef(7)).epsilon(1e-15));
    CHECK(c.state_coef == doctest::Approx(schedule.posterior_x_coef(7)).epsilon(1e-15));
    CHECK(c.variance == doctest::Approx(schedule.posterior_variance(7)).epsilon(1e-15));
    // Composed skip variance has the closed form (1-g)(1-abar_lo)/(1-abar_hi)
    // with g = abar_hi/abar_lo.
    const IntervalCoefs w = compose_interval(schedule, 9, 4);
    const double g = schedule.alpha_bar(9) / schedule.alpha_bar(4);
    const double expect = (1.0 - g) * (1.0 - schedule.alpha_bar(4)) / (1.0 - schedule.alpha_bar(9));
    CHECK(w.variance == doctest::Approx(expect).epsilon(1e-10));
}

TEST_SUITE_END();
