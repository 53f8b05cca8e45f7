// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include "diffrl/rl.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace diffrl {

const char* rl_algorithm_name(RlAlgorithm a) {
    switch (a) {
        case RlAlgorithm::ppo: return "ppo";
        case RlAlgorithm::grpo: return "grpo";
        case RlAlgorithm::dr_grpo: return "dr_grpo";
    }
    return "?";
}

RlAlgorithm rl_algorithm_from_name(const std::string& name) {
    if (name == "ppo") return RlAlgorithm::ppo;
    if (name == "grpo") return RlAlgorithm::grpo;
    if (name == "dr_grpo") return RlAlgorithm::dr_grpo;
    throw std::invalid_argument("unknown rl algorithm: " + name);
}

void RlConfig::validate() const {
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw std::invalid_argument("RlConfig: clip_eps must be in (0,1)");
    if (group_size < 1) throw std::invalid_argument("RlConfig: group_size must be >= 1");
    if (algorithm != RlAlgorithm::ppo && group_size < 2) {
        throw std::invalid_argument("RlConfig: group estimators need group_size >= 2");
    }
    if (n_prompts < 1) throw std::invalid_argument("RlConfig: n_prompts must be >= 1");
    if (inner_epochs < 0) throw std::invalid_argument("RlConfig: inner_epochs must be >= 0");
    if (kl_beta < 0.0 || div_lambda < 0.0) throw std::invalid_argument("RlConfig: penalty weights must be >= 0");
    if (divergence) divergence->validate();
    if (!(lr > 0.0)) throw std::invalid_argument("RlConfig: lr must be positive");
}

RolloutBuffer collect_rollouts(const StudentPolicy& policy, Rewarder& rewarder, int n_prompts,
                               int group_size, uint64_t seed) {
    if (n_prompts < 1 || group_size < 1) {
        throw std::invalid_argument("collect_rollouts: n_prompts and group_size must be >= 1");
    }
    RolloutBuffer buffer;
    buffer.group_size = group_size;
    const bool pairs = rewarder.needs_teacher_pairs();
    const int n = n_prompts * group_size;
    buffer.trajectories.reserve(static_cast<size_t>(n));

    for (int p = 0; p < n_prompts; ++p) {
        const std::optional<int> cond =
            policy.cond_dim > 0 ? std::optional<int>(p % policy.cond_dim) : std::nullopt;
        for (int g = 0; g < group_size; ++g) {
            const int idx = p * group_size + g;
            const uint64_t stream = mix_seed(seed, static_cast<uint64_t>(idx));
            Trajectory traj;
            try {
                traj = rollout(policy, cond, stream);
            } catch (const std::exception& e) {
                throw std::runtime_error("collect_rollouts: trajectory " + std::to_string(idx) +
                                         ": " + e.what());
            }
            if (pairs) {
                Rng teacher_rng(mix_seed(stream, 0x7ea));
                buffer.teacher_finals.push_back(sample_reverse_from(
                    *rewarder.teacher(), *rewarder.schedule(), traj.states.front(), teacher_rng));
            }
            buffer.conditions.push_back(cond);
            buffer.old_logprobs.push_back(traj.step_logprobs);
            buffer.trajectories.push_back(std::move(traj));
        }
    }
    try {
        buffer.rewards = rewarder.score(buffer.trajectories, buffer.teacher_finals, group_size);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("collect_rollouts: reward failure: ") + e.what());
    }
    return buffer;
}

AdvantageEstimate advantages_ppo(const RewardBatch& rewards) {
    if (rewards.total.size() < 2) throw std::invalid_argument("advantages_ppo: batch size must be >= 2");
    const MeanStd ms = mean_std(rewards.total);
    AdvantageEstimate adv;
    adv.estimator = RlAlgorithm::ppo;
    adv.values.resize(rewards.total.size());
    for (size_t i = 0; i < rewards.total.size(); ++i) {
        adv.values[i] = (rewards.total[i] - ms.mean) / (ms.stddev + 1e-8);
    }
    return adv;
}

AdvantageEstimate advantages_group(const RewardBatch& rewards, int group_size, bool normalize) {
    const size_t n = rewards.total.size();
    if (group_size < 2) throw std::invalid_argument("advantages_group: group size must be >= 2");
    if (n == 0 || n % static_cast<size_t>(group_size) != 0) {
        throw std::invalid_argument("advantages_group: batch not divisible into equal groups");
    }
    AdvantageEstimate adv;
    adv.estimator = normalize ? RlAlgorithm::grpo : RlAlgorithm::dr_grpo;
    adv.values.resize(n);
    for (size_t start = 0; start < n; start += static_cast<size_t>(group_size)) {
        const std::span<const double> group(rewards.total.data() + start,
                                            static_cast<size_t>(group_size));
        const MeanStd ms = mean_std(group);
        const double denom = normalize ? std::max(ms.stddev, 1e-8) : 1.0;
        for (size_t i = 0; i < static_cast<size_t>(group_size); ++i) {
            adv.values[start + i] = (group[i] - ms.mean) / denom;
        }
    }
    return adv;
}

AdvantageEstimate estimate_advantages(const RlConfig& config, const RolloutBuffer& buffer) {
    switch (config.algorithm) {
        case RlAlgorithm::ppo: return advantages_ppo(buffer.rewards);
        case RlAlgorithm::grpo: return advantages_group(buffer.rewards, buffer.group_size, true);
        case RlAlgorithm::dr_grpo: return advantages_group(buffer.rewards, buffer.group_size, false);
    }
    throw std::logic_error("unreachable algorithm");
}

double clipped_surrogate(double new_logprob, double old_logprob, double advantage, double clip_eps,
                         bool clip_enabled) {
    double dnew;
    return clipped_surrogate_grad(new_logprob, old_logprob, advantage, clip_eps, clip_enabled, dnew);
}

double clipped_surrogate_grad(double new_logprob, double old_logprob, double advantage,
                              double clip_eps, bool clip_enabled, double& dnew) {
    const double ratio = std::exp(new_logprob - old_logprob);
    if (!clip_enabled) {
        dnew = -advantage * ratio;
        return -ratio * advantage;
    }
    const double unclipped = ratio * advantage;
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantage;
    if (unclipped <= clipped) {
        dnew = -advantage * ratio;
        return -unclipped;
    }
    // The clipped branch is active only when the clamp binds, so its
    // derivative in new_logprob is zero.
    dnew = 0.0;
    return -clipped;
}

double kl_penalty_k3(double old_logprob, double new_logprob) {
    const double d = old_logprob - new_logprob;
    return std::expm1(d) - d;
}

AlignedReference align_reference(const Denoiser& teacher, const NoiseSchedule& schedule,
                                 const CoarseSchedule& coarse, const Trajectory& student_traj) {
    if (student_traj.states.size() != static_cast<size_t>(coarse.steps) + 1 ||
        student_traj.timesteps.front() != coarse.taus.front()) {
        throw std::invalid_argument("align_reference: trajectory does not match the coarse schedule");
    }
    for (size_t j = 0; j < student_traj.timesteps.size(); ++j) {
        if (student_traj.timesteps[j] != coarse.taus[j]) {
            throw std::invalid_argument("align_reference: trajectory timesteps mismatch");
        }
    }
    AlignedReference ref;
    ref.steps.reserve(static_cast<size_t>(coarse.steps));
    for (int k = 0; k < coarse.steps; ++k) {
        const IntervalKernel kern =
            aligned_interval_kernel(teacher, schedule, student_traj.states[static_cast<size_t>(k)],
                                    coarse.taus[static_cast<size_t>(k)],
                                    coarse.taus[static_cast<size_t>(k) + 1]);
        GaussianParams g;
        g.mean = kern.mean;
        g.stddev = kern.stddev;
        ref.steps.push_back(std::move(g));
    }
    return ref;
}

AlignedReference reference_from_policy(const StudentPolicy& frozen, const Trajectory& student_traj) {
    AlignedReference ref;
    ref.steps.reserve(static_cast<size_t>(frozen.coarse.steps));
    for (int k = 0; k < frozen.coarse.steps; ++k) {
        const TransitionDistribution dist =
            transition(frozen, student_traj.states[static_cast<size_t>(k)], k, student_traj.condition);
        ref.steps.push_back(GaussianParams::isotropic(dist.mean, dist.stddev));
    }
    return ref;
}

double divergence_penalty(const std::vector<TransitionDistribution>& student_steps,
                          const AlignedReference& reference, const DivergenceSpec& spec) {
    if (student_steps.size() != reference.steps.size() || student_steps.empty()) {
        throw std::invalid_argument("divergence_penalty: step pairing incomplete");
    }
    double total = 0.0;
    for (size_t k = 0; k < student_steps.size(); ++k) {
        const GaussianParams p = GaussianParams::isotropic(student_steps[k].mean, student_steps[k].stddev);
        total += divergence(spec, p, reference.steps[k]);
    }
    return total / static_cast<double>(student_steps.size());
}

namespace {

constexpr double kStdFloor = 1e-4;
constexpr double kStdCeil = 10.0;

}  // namespace

double rl_loss(const StudentPolicy& policy, std::span<const double> flat_params,
               const RolloutBuffer& buffer, const AdvantageEstimate& advantages,
               const std::vector<AlignedReference>& references, const RlConfig& config,
               std::span<double> grad, StepDiagnostics* diagnostics) {
    if (buffer.size() == 0) throw std::invalid_argument("rl_loss: empty buffer");
    if (advantages.values.size() != buffer.size()) throw std::invalid_argument("rl_loss: advantage size mismatch");
    const bool use_div = config.uses_divergence();
    if (use_div && references.size() != buffer.size()) {
        throw std::invalid_argument("rl_loss: references missing for divergence penalty");
    }
    const bool want_grad = !grad.empty();
    if (want_grad && static_cast<int>(grad.size()) != policy.param_count()) {
        throw std::invalid_argument("rl_loss: gradient size mismatch");
    }

    // Evaluate at the supplied parameters on a scratch copy of the policy.
    StudentPolicy eval_policy = policy;
    eval_policy.set_flat_params(flat_params);
    const int net_params = eval_policy.net.param_count();
    const int n_steps = eval_policy.coarse.steps;
    const int d = eval_policy.data_dim;

    if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);

    const double n_terms = static_cast<double>(buffer.size()) * n_steps;
    double loss = 0.0;
    double ratio_sum = 0.0, clip_count = 0.0, k3_sum = 0.0, div_sum = 0.0;

    Mlp::Tape tape;
    Vec dout(static_cast<size_t>(d));
    Vec dmean_div, dstd_div;

    for (size_t i = 0; i < buffer.size(); ++i) {
        const Trajectory& traj = buffer.trajectories[i];
        const double advantage = advantages.values[i];
        for (int k = 0; k < n_steps; ++k) {
            const Vec& x = traj.states[static_cast<size_t>(k)];
            const Vec& x_next = traj.states[static_cast<size_t>(k) + 1];
            const double old_lp = buffer.old_logprobs[i][static_cast<size_t>(k)];

            // Policy transition with tape for the backward pass.
            Vec extra(static_cast<size_t>(n_steps + eval_policy.cond_dim), 0.0);
            extra[static_cast<size_t>(k)] = 1.0;
            if (traj.condition) extra[static_cast<size_t>(n_steps + *traj.condition)] = 1.0;
            const Vec eps = eval_policy.net.predict(x, eval_policy.coarse.taus[static_cast<size_t>(k)], extra, tape);
            const double sx = eval_policy.skip_x[static_cast<size_t>(k)];
            const double se = eval_policy.skip_eps[static_cast<size_t>(k)];
            Vec mean(static_cast<size_t>(d));
            for (int j = 0; j < d; ++j) mean[static_cast<size_t>(j)] = sx * x[static_cast<size_t>(j)] + se * eps[static_cast<size_t>(j)];
            const double raw_std = std::exp(eval_policy.log_stds[static_cast<size_t>(k)]);
            const bool std_clamped = raw_std <= kStdFloor || raw_std >= kStdCeil;
            const double stddev = std::clamp(raw_std, kStdFloor, kStdCeil);

            const double new_lp = gaussian_logpdf(x_next, mean, stddev);

            double dnew = 0.0;
            const double surrogate = clipped_surrogate_grad(new_lp, old_lp, advantage,
                                                            config.clip_eps, config.clip_enabled, dnew);
            const double k3 = kl_penalty_k3(old_lp, new_lp);
            const double dk3_dnew = 1.0 - std::exp(old_lp - new_lp);

            double div_value = 0.0;
            if (use_div) {
                const GaussianParams p = GaussianParams::isotropic(mean, stddev);
                div_value = divergence_grad(*config.divergence, p, references[i].steps[static_cast<size_t>(k)],
                                            dmean_div, dstd_div);
            }

            loss += (surrogate + config.kl_beta * k3 + config.div_lambda * div_value) / n_terms;

            const double ratio = std::exp(new_lp - old_lp);
            ratio_sum += ratio;
            if (ratio < 1.0 - config.clip_eps || ratio > 1.0 + config.clip_eps) clip_count += 1.0;
            k3_sum += k3;
            div_sum += div_value;

            if (!want_grad) continue;

            // d(loss)/d(new_lp) and its chain into mean and stddev.
            const double dlp = (dnew + config.kl_beta * dk3_dnew) / n_terms;
            double dstd_total = 0.0;
            double sq_sum = 0.0;
            const double inv_var = 1.0 / (stddev * stddev);
            for (int j = 0; j < d; ++j) {
                const double r = x_next[static_cast<size_t>(j)] - mean[static_cast<size_t>(j)];
                sq_sum += r * r;
                dout[static_cast<size_t>(j)] = dlp * (r * inv_var);
            }
            dstd_total += dlp * (-d / stddev + sq_sum / (stddev * stddev * stddev));
            if (use_div) {
                const double w = config.div_lambda / n_terms;
                for (int j = 0; j < d; ++j) dout[static_cast<size_t>(j)] += w * dmean_div[static_cast<size_t>(j)];
                for (int j = 0; j < d; ++j) dstd_total += w * dstd_div[static_cast<size_t>(j)];
            }
            // mean = sx * x + se * eps(net), so d(loss)/d(eps) = se * dout.
            for (int j = 0; j < d; ++j) dout[static_cast<size_t>(j)] *= se;
            eval_policy.net.net.backward(tape, dout, grad.subspan(0, static_cast<size_t>(net_params)));
            if (config.learn_stds && !std_clamped) {
                grad[static_cast<size_t>(net_params + k)] += dstd_total * stddev;
            }
        }
    }

    if (diagnostics) {
        diagnostics->loss = loss;
        diagnostics->ratio_mean = ratio_sum / n_terms;
        diagnostics->clip_fraction = clip_count / n_terms;
        diagnostics->kl_estimate = k3_sum / n_terms;
        diagnostics->divergence_value = div_sum / n_terms;
        diagnostics->reward_mean = mean_std(buffer.rewards.total).mean;
    }
    if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "rl_loss: non-finite loss (ratio_mean=" << ratio_sum / n_terms
            << ", kl=" << k3_sum / n_terms << ", div=" << div_sum / n_terms << ")";
        throw std::runtime_error(msg.str());
    }
    return loss;
}

StepDiagnostics update(StudentPolicy& policy, const RolloutBuffer& buffer,
                       const AdvantageEstimate& advantages,
                       const std::vector<AlignedReference>& references, const RlConfig& config,
                       AdamOptimizer& optimizer) {
    config.validate();
    StepDiagnostics accum;
    if (config.inner_epochs == 0) {
        accum.reward_mean = mean_std(buffer.rewards.total).mean;
        return accum;
    }
    std::vector<double> flat = policy.flat_params();
    std::vector<double> grad(flat.size());
    int done = 0;
    for (int e = 0; e < config.inner_epochs; ++e) {
        StepDiagnostics diag;
        rl_loss(policy, flat, buffer, advantages, references, config, grad, &diag);
        if (config.target_kl > 0.0 && e > 0 && diag.kl_estimate > config.target_kl) break;
        optimizer.step(flat, grad);
        ++done;
        accum.loss += diag.loss;
        accum.ratio_mean += diag.ratio_mean;
        accum.clip_fraction += diag.clip_fraction;
        accum.kl_estimate += diag.kl_estimate;
        accum.divergence_value += diag.divergence_value;
        accum.reward_mean = diag.reward_mean;
    }
    if (done > 0) {
        accum.loss /= done;
        accum.ratio_mean /= done;
        accum.clip_fraction /= done;
        accum.kl_estimate /= done;
        accum.divergence_value /= done;
    }
    policy.set_flat_params(flat);
    return accum;
}

std::vector<Vec> sample_student_finals(const StudentPolicy& policy, int n, uint64_t seed) {
    std::vector<Vec> finals;
    finals.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const std::optional<int> cond =
            policy.cond_dim > 0 ? std::optional<int>(i % policy.cond_dim) : std::nullopt;
        finals.push_back(rollout(policy, cond, mix_seed(seed, static_cast<uint64_t>(i))).final_state());
    }
    return finals;
}

MetricBlock evaluate_samples(const std::vector<Vec>& real, const std::vector<Vec>& fake,
                             const DataSpec& data, const EvalSettings& eval) {
    MetricBlock block;
    const Encoder enc(data.dim, 0);
    std::vector<Vec> er, ef;
    er.reserve(real.size());
    ef.reserve(fake.size());
    for (const Vec& x : real) er.push_back(enc.embed(x));
    for (const Vec& x : fake) ef.push_back(enc.embed(x));
    block.fid = frechet_distance(er, ef);
    block.prdc = prdc(real, fake, eval.prdc_k);
    block.covered_modes = mode_metrics(fake, data).covered;
    return block;
}

DistillResult distill(const Denoiser& teacher, StudentPolicy student, Rewarder& rewarder,
                      const RlConfig& config, int epochs, uint64_t seed, const EvalSettings& eval) {
    config.validate();
    if (epochs < 0) throw std::invalid_argument("distill: epochs must be >= 0");

    DistillResult result{student, student, 0, {}};
    if (epochs == 0) return result;

    // Fixed reference sample set and evaluation noise, shared across epochs.
    Rng data_rng(mix_seed(seed, 0xda7a));
    std::vector<Vec> real;
    real.reserve(static_cast<size_t>(eval.n_samples));
    for (int i = 0; i < eval.n_samples; ++i) real.push_back(rewarder.data().sample(data_rng));
    const uint64_t eval_seed = mix_seed(seed, 0xe7a1);

    const StudentPolicy initial = student;  // frozen reference for ReferencePolicy::initial_student
    AdamOptimizer optimizer(student.param_count(), config.lr);

    double best_fid = 0.0;
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        try {
            RolloutBuffer buffer =
                collect_rollouts(student, rewarder, config.n_prompts, config.group_size,
                                 mix_seed(seed, 0xc0 + static_cast<uint64_t>(epoch)));
            const AdvantageEstimate adv = estimate_advantages(config, buffer);

            std::vector<AlignedReference> refs;
            if (config.uses_divergence()) {
                refs.reserve(buffer.size());
                for (const Trajectory& traj : buffer.trajectories) {
                    refs.push_back(config.reference == ReferencePolicy::teacher
                                       ? align_reference(teacher, student.schedule, student.coarse, traj)
                                       : reference_from_policy(initial, traj));
                }
            }

            const StepDiagnostics diag = update(student, buffer, adv, refs, config, optimizer);

            const std::vector<Vec> fake = sample_student_finals(student, eval.n_samples, eval_seed);
            const MetricBlock block = evaluate_samples(real, fake, rewarder.data(), eval);
            const MeanStd reward_ms = mean_std(buffer.rewards.total);

            EpochRow row;
            row.epoch = epoch;
            row.reward_mean = reward_ms.mean;
            row.reward_std = reward_ms.stddev;
            row.fid = block.fid;
            row.precision = block.prdc.precision;
            row.recall = block.prdc.recall;
            row.density = block.prdc.density;
            row.coverage = block.prdc.coverage;
            row.kl_k3 = diag.kl_estimate;
            row.div_penalty = diag.divergence_value;
            row.clip_frac = diag.clip_fraction;
            row.ratio_mean = diag.ratio_mean;
            result.log.push_back(row);

            if (epoch == 1 || block.fid < best_fid) {
                best_fid = block.fid;
                result.best_policy = student;
                result.best_epoch = epoch;
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("distill: epoch " + std::to_string(epoch) + ": " + e.what());
        }
    }
    result.policy = student;
    return result;
}

}  // namespace diffrl
