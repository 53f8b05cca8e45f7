// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
//
// Oracle checks behind the `verify` subcommand. Every check validates a
// library computation against an independent route: fixed-grid quadrature,
// brute-force enumeration, finite differences, or hand-computed values.
#include <algorithm>
#include <cmath>
#include <ostream>

#include "diffrl/experiment.hpp"

namespace diffrl {

namespace {

struct Checker {
    std::ostream& os;
    int failures = 0;

    void check(const std::string& name, bool ok, const std::string& detail = "") {
        os << (ok ? "[ ok ] " : "[FAIL] ") << name;
        if (!detail.empty()) os << " (" << detail << ")";
        os << "\n";
        if (!ok) ++failures;
    }
};

// Brute-force PRDC with full sorted distance lists, kept independent of the
// library implementation.
PRDCResult prdc_bruteforce(const std::vector<Vec>& real, const std::vector<Vec>& fake, int k) {
    auto radii = [k](const std::vector<Vec>& set) {
        std::vector<double> out(set.size());
        for (size_t i = 0; i < set.size(); ++i) {
            std::vector<double> ds;
            for (size_t j = 0; j < set.size(); ++j) {
                if (j != i) ds.push_back(std::sqrt(squared_distance(set[i], set[j])));
            }
            std::sort(ds.begin(), ds.end());
            out[i] = ds[static_cast<size_t>(k - 1)];
        }
        return out;
    };
    const auto rr = radii(real);
    const auto fr = radii(fake);
    PRDCResult r;
    double prec = 0.0, dens = 0.0;
    for (const Vec& f : fake) {
        int c = 0;
        for (size_t i = 0; i < real.size(); ++i) {
            if (std::sqrt(squared_distance(f, real[i])) <= rr[i]) ++c;
        }
        if (c > 0) prec += 1.0;
        dens += c;
    }
    r.precision = prec / static_cast<double>(fake.size());
    r.density = dens / (static_cast<double>(k) * static_cast<double>(fake.size()));
    double rec = 0.0, cov = 0.0;
    for (size_t i = 0; i < real.size(); ++i) {
        bool in_fake_ball = false, has_fake = false;
        for (size_t f = 0; f < fake.size(); ++f) {
            const double d = std::sqrt(squared_distance(real[i], fake[f]));
            if (d <= fr[f]) in_fake_ball = true;
            if (d <= rr[i]) has_fake = true;
        }
        if (in_fake_ball) rec += 1.0;
        if (has_fake) cov += 1.0;
    }
    r.recall = rec / static_cast<double>(real.size());
    r.coverage = cov / static_cast<double>(real.size());
    return r;
}

GaussianParams g1(double mean, double stddev) { return GaussianParams::isotropic({mean}, stddev); }

// A single-affine-layer denoiser is exactly linear in x, which makes the
// reverse chain a linear-Gaussian recursion with a closed form.
Denoiser make_linear_denoiser(int data_dim, int time_features, double slope, double offset) {
    Denoiser d(data_dim, time_features, 0, {}, Activation::tanh_act);
    auto& p = d.net.params();
    const int in = d.net.input_dim();
    for (int o = 0; o < data_dim; ++o) {
        p[static_cast<size_t>(o) * in + o] = slope;                       // x block, diagonal
        p[static_cast<size_t>(data_dim) * in + o] = 0.0;                  // bias slot below
    }
    for (int o = 0; o < data_dim; ++o) p[static_cast<size_t>(data_dim) * in + o] = offset;
    return d;
}

struct LinearChain {
    double mean = 0.0;
    double variance = 0.0;
};

// Closed-form composition of the posterior transitions of a linear denoiser
// eps(x, t) = slope * x + offset.
LinearChain linear_chain_oracle(const NoiseSchedule& schedule, double slope, double offset,
                                double x_start, int t_hi, int t_lo) {
    LinearChain c{x_start, 0.0};
    for (int t = t_hi; t > t_lo; --t) {
        const double k = schedule.beta(t) / std::sqrt(1.0 - schedule.alpha_bar(t));
        const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha(t));
        const double a = inv_sqrt_alpha * (1.0 - k * slope);
        const double b = -inv_sqrt_alpha * k * offset;
        c.mean = a * c.mean + b;
        c.variance = a * a * c.variance + schedule.posterior_variance(t);
    }
    return c;
}

void check_divergences(Checker& ck) {
    Rng rng(20260810);
    const std::vector<DivergenceSpec> kinds = {
        {DivergenceKind::kl}, {DivergenceKind::chi2}, {DivergenceKind::renyi, 0.5, 1.0},
        {DivergenceKind::js}, {DivergenceKind::power, 0.5, 1.0}};
    for (const auto& spec : kinds) {
        double worst = 0.0;
        int n = 0;
        while (n < 20) {
            GaussianParams p = g1(4.0 * rng.uniform() - 2.0, 0.3 + 1.7 * rng.uniform());
            GaussianParams q = g1(4.0 * rng.uniform() - 2.0, 0.3 + 1.7 * rng.uniform());
            // chi2 and power(1) share the tail condition 2 std_q^2 > std_p^2;
            // keep a margin so the quadrature window stays reasonable.
            if ((spec.kind == DivergenceKind::chi2 || spec.kind == DivergenceKind::power) &&
                !(2.0 * q.stddev[0] * q.stddev[0] - p.stddev[0] * p.stddev[0] > 0.25)) {
                continue;
            }
            ++n;
            const double closed = divergence(spec, p, q);
            const double oracle = quadrature_oracle(spec, p, q, 1 << 14);
            worst = std::max(worst, std::abs(closed - oracle));
        }
        const GaussianParams same = g1(0.7, 1.3);
        const double self = divergence(spec, same, same);
        ck.check(std::string("divergence ") + divergence_kind_name(spec.kind) +
                     " closed-form vs quadrature oracle",
                 worst < 1e-6 && std::abs(self) < 1e-9,
                 "max |diff|=" + format_metric(worst) + ", D(p,p)=" + format_metric(self));
    }
    // Family limits.
    const GaussianParams p = g1(0.0, 1.0), q = g1(1.0, 1.0);
    const double kl = divergence({DivergenceKind::kl}, p, q);
    const double renyi_lo = divergence({DivergenceKind::renyi, 1.0 - 1e-4, 1.0}, p, q);
    const double renyi_hi = divergence({DivergenceKind::renyi, 1.0 + 1e-4, 1.0}, p, q);
    ck.check("renyi alpha->1 brackets kl",
             std::min(renyi_lo, renyi_hi) < kl + 1e-3 && std::max(renyi_lo, renyi_hi) > kl - 1e-3 &&
                 std::abs(renyi_lo - kl) < 1e-3 && std::abs(renyi_hi - kl) < 1e-3);
    const double power_small = divergence({DivergenceKind::power, 0.5, 1e-4}, p, q);
    ck.check("power lambda->0 approaches kl", std::abs(power_small - kl) < 1e-3,
             "|power(1e-4)-kl|=" + format_metric(std::abs(power_small - kl)));
}

void check_prdc(Checker& ck) {
    Rng rng(777);
    bool all_exact = true;
    for (int trial = 0; trial < 100; ++trial) {
        const int k = rng.uniform_int(1, 4);
        const int nr = rng.uniform_int(k + 1, 32);
        const int nf = rng.uniform_int(k + 1, 32);
        const int dim = rng.uniform_int(1, 3);
        std::vector<Vec> real, fake;
        for (int i = 0; i < nr; ++i) real.push_back(rng.normal_vec(dim));
        for (int i = 0; i < nf; ++i) {
            Vec v = rng.normal_vec(dim);
            for (double& x : v) x += 0.5;
            fake.push_back(v);
        }
        const PRDCResult a = prdc(real, fake, k);
        const PRDCResult b = prdc_bruteforce(real, fake, k);
        if (a.precision != b.precision || a.recall != b.recall || a.density != b.density ||
            a.coverage != b.coverage) {
            all_exact = false;
            break;
        }
    }
    ck.check("prdc matches brute-force k-NN on 100 random instances", all_exact);
}

void check_frechet(Checker& ck) {
    Rng rng(99);
    std::vector<Vec> a, b;
    for (int i = 0; i < 4096; ++i) {
        a.push_back({rng.normal()});
        b.push_back({rng.normal() + 1.0});
    }
    const double self = frechet_distance(a, a);
    const double shifted = frechet_distance(a, b);
    ck.check("frechet identity and unit-shift value", self < 1e-8 && std::abs(shifted - 1.0) < 0.1,
             "d(A,A)=" + format_metric(self) + ", d(N(0,1),N(1,1))~" + format_metric(shifted));
    const double swapped = frechet_distance(b, a);
    ck.check("frechet symmetry", std::abs(shifted - swapped) < 1e-10);
}

void check_gradients(Checker& ck) {
    // Quadratic sanity.
    auto sq_loss = [](std::span<const double> p) {
        double s = 0.0;
        for (double x : p) s += 0.5 * x * x;
        return s;
    };
    auto sq_grad = [](std::span<const double> p, std::span<double> g) {
        for (size_t i = 0; i < p.size(); ++i) g[i] = p[i];
    };
    Rng rng(5);
    const GradCheckResult quad = gradcheck(sq_loss, sq_grad, rng.normal_vec(16), 1e-4);
    ck.check("gradcheck exact on quadratic loss", quad.max_rel_err < 1e-10,
             "rel err=" + format_metric(quad.max_rel_err));

    // Combined RL loss on a width-8 student (untrained nets are fine here).
    const NoiseSchedule schedule = build_schedule(ScheduleKind::linear, 12, 0.02, 0.3);
    Denoiser teacher = make_teacher_net(2, {8}, 4, Activation::tanh_act, 3);
    const CoarseSchedule coarse = build_coarse_schedule(12, 3, CoarseStrategy::uniform);
    StudentPolicy policy = init_from_teacher(teacher, schedule, coarse, 0);

    RlConfig config;
    config.algorithm = RlAlgorithm::ppo;
    config.group_size = 1;
    config.n_prompts = 4;
    config.kl_beta = 0.05;
    config.div_lambda = 0.1;
    config.divergence = DivergenceSpec{DivergenceKind::kl};

    RewardSpec rspec{{{RewardKind::energy, 1.0, 0}}, RewardNormalize::none};
    Rewarder rewarder(rspec, DataSpec::gmm_ring(8, 4.0, 0.15), &teacher, &schedule);
    const RolloutBuffer buffer = collect_rollouts(policy, rewarder, 4, 1, 42);
    const AdvantageEstimate adv = advantages_ppo(buffer.rewards);
    std::vector<AlignedReference> refs;
    for (const auto& t : buffer.trajectories) {
        refs.push_back(align_reference(teacher, schedule, coarse, t));
    }
    // Move off-policy so the ratio terms carry signal.
    std::vector<double> params = policy.flat_params();
    Rng jitter(11);
    for (double& p : params) p += 0.01 * jitter.normal();

    auto loss_fn = [&](std::span<const double> p) {
        return rl_loss(policy, p, buffer, adv, refs, config, {}, nullptr);
    };
    auto grad_fn = [&](std::span<const double> p, std::span<double> g) {
        rl_loss(policy, p, buffer, adv, refs, config, g, nullptr);
    };
    const GradCheckResult rl = gradcheck(loss_fn, grad_fn, params, 1e-5, 256, 7);
    ck.check("combined RL loss gradient vs finite differences", rl.max_rel_err < 1e-4,
             "rel err=" + format_metric(rl.max_rel_err));
}

void check_estimators(Checker& ck) {
    Rng rng(31337);
    double worst_sum = 0.0, worst_rel = 0.0;
    bool zero_ok = true;
    for (int trial = 0; trial < 100; ++trial) {
        const int g = rng.uniform_int(2, 8);
        const int groups = rng.uniform_int(1, 6);
        RewardBatch batch;
        for (int i = 0; i < g * groups; ++i) batch.total.push_back(rng.normal() * 3.0);
        const AdvantageEstimate grpo = advantages_group(batch, g, true);
        const AdvantageEstimate dr = advantages_group(batch, g, false);
        for (int s = 0; s < groups; ++s) {
            double sum = 0.0;
            std::span<const double> group(batch.total.data() + static_cast<size_t>(s) * g,
                                          static_cast<size_t>(g));
            const double sd = mean_std(group).stddev;
            for (int i = 0; i < g; ++i) {
                const size_t idx = static_cast<size_t>(s) * g + static_cast<size_t>(i);
                sum += dr.values[idx];
                if (sd > 1e-8) {
                    worst_rel = std::max(worst_rel, std::abs(grpo.values[idx] - dr.values[idx] / sd));
                }
            }
            worst_sum = std::max(worst_sum, std::abs(sum));
        }
    }
    {
        RewardBatch constant;
        constant.total.assign(6, 2.5);
        for (double a : advantages_group(constant, 3, true).values) {
            if (a != 0.0) zero_ok = false;
        }
    }
    ck.check("group advantages: zero sums, grpo = dr/std, constant groups zero",
             worst_sum < 1e-10 && worst_rel < 1e-10 && zero_ok,
             "max|sum|=" + format_metric(worst_sum) + ", max rel=" + format_metric(worst_rel));

    const double s1 = clipped_surrogate(std::log(1.5), 0.0, 1.0, 0.2, true);
    const double s2 = clipped_surrogate(0.7, 0.7, 2.5, 0.2, true);
    const double s3 = clipped_surrogate(std::log(0.5), 0.0, -1.0, 0.2, true);
    ck.check("clipped surrogate arithmetic",
             std::abs(s1 + 1.2) < 1e-12 && std::abs(s2 + 2.5) < 1e-12 && std::abs(s3 - 0.8) < 1e-12,
             format_metric(s1) + ", " + format_metric(s2) + ", " + format_metric(s3));

    const double k0 = kl_penalty_k3(1.0, 1.0);
    const double kp = kl_penalty_k3(0.5, 0.0);
    const double km = kl_penalty_k3(0.0, 0.5);
    const double kq = kl_penalty_k3(1e-3, 0.0);
    ck.check("k3 penalty values and small-delta expansion",
             k0 == 0.0 && std::abs(kp - 0.14872127) < 1e-7 && std::abs(km - 0.10653066) < 1e-7 &&
                 std::abs(kq - 0.5e-6) < 1e-7);
}

void check_kernel_grid(Checker& ck) {
    const NoiseSchedule schedule = build_schedule(ScheduleKind::linear, 30, 0.01, 0.25);
    const Denoiser lin = make_linear_denoiser(1, 4, 0.4, 0.1);

    // The window must hold the fully composed support (~8 sigma) or boundary
    // truncation biases the moments.
    GridSpec grid;
    grid.lo = {-12.0};
    grid.hi = {12.0};
    grid.resolution = {8192};

    const KernelGridResult direct = compose_kernel_grid(lin, schedule, 24, 12, {1.0}, grid);
    const LinearChain oracle = linear_chain_oracle(schedule, 0.4, 0.1, 1.0, 24, 12);
    const double mean_err = std::abs(direct.moments.mean[0] - oracle.mean);
    const double var_err = std::abs(direct.moments.variance[0] - oracle.variance);
    ck.check("kernel grid matches linear-Gaussian chain",
             mean_err < 1e-6 && var_err < 1e-6 && std::abs(direct.moments.excess_kurtosis[0]) < 1e-3 &&
                 std::abs(direct.leaked_mass) < 1e-6,
             "mean err=" + format_metric(mean_err) + ", var err=" + format_metric(var_err));

    const KernelGridResult half = compose_kernel_grid(lin, schedule, 24, 18, {1.0}, grid);
    const GridDensity staged = compose_from_density(lin, schedule, 18, 12, half.density);
    const double tv = total_variation(staged, direct.density);
    ck.check("Chapman-Kolmogorov staging consistency", tv < 1e-4, "tv=" + format_metric(tv));
}

void check_monitor(Checker& ck) {
    std::vector<double> reward(40), fid(40);
    for (int e = 0; e < 40; ++e) {
        reward[static_cast<size_t>(e)] = e;
        fid[static_cast<size_t>(e)] = e < 20 ? 40.0 - e : static_cast<double>(e);
    }
    const auto flag = overopt_monitor(reward, fid, 5);
    ck.check("overoptimization monitor flags the scripted turn",
             flag.has_value() && std::abs(*flag - 20) <= 5,
             flag ? "epoch " + std::to_string(*flag) : "no flag");
    std::vector<double> healthy_fid(40);
    for (int e = 0; e < 40; ++e) healthy_fid[static_cast<size_t>(e)] = 40.0 - e;
    const auto healthy = overopt_monitor(reward, healthy_fid, 5);
    std::vector<double> flat(40, 1.0);
    const auto degenerate = overopt_monitor(flat, flat, 5);
    ck.check("overoptimization monitor silent on healthy and constant runs",
             !healthy.has_value() && !degenerate.has_value());
}

}  // namespace

int verify_suite(std::ostream& os) {
    Checker ck{os};
    check_divergences(ck);
    check_prdc(ck);
    check_frechet(ck);
    check_gradients(ck);
    check_estimators(ck);
    check_kernel_grid(ck);
    check_monitor(ck);
    os << (ck.failures == 0 ? "all checks passed\n"
                            : std::to_string(ck.failures) + " check(s) failed\n");
    return ck.failures;
}

}  // namespace diffrl
