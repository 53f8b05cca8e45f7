// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "diffrl/divergence.hpp"
#include "diffrl/metrics.hpp"
#include "diffrl/rewards.hpp"
#include "diffrl/student.hpp"

namespace diffrl {

enum class RlAlgorithm { ppo, grpo, dr_grpo };
enum class ReferencePolicy { teacher, initial_student };

const char* rl_algorithm_name(RlAlgorithm a);
RlAlgorithm rl_algorithm_from_name(const std::string& name);

struct RlConfig {
    RlAlgorithm algorithm = RlAlgorithm::grpo;
    double clip_eps = 0.2;
    double lr = 1.5e-3;
    int inner_epochs = 4;
    int group_size = 8;
    int n_prompts = 8;
    double kl_beta = 0.05;
    double div_lambda = 0.3;
    std::optional<DivergenceSpec> divergence = DivergenceSpec{DivergenceKind::kl};
    bool clip_enabled = true;
    bool learn_stds = true;
    ReferencePolicy reference = ReferencePolicy::teacher;
    // Inner epochs stop early once the mean k3 estimate passes this bound;
    // 0 disables the guard.
    double target_kl = 0.05;

    void validate() const;
    bool uses_divergence() const { return div_lambda > 0.0 && divergence.has_value(); }
};

// Collected experience. old_logprobs snapshot the behavior policy at
// collection time and stay frozen across the inner update epochs.
struct RolloutBuffer {
    std::vector<Trajectory> trajectories;
    std::vector<std::vector<double>> old_logprobs;
    RewardBatch rewards;
    std::vector<std::optional<int>> conditions;
    std::vector<Vec> teacher_finals;  // shared-noise paired samples (empty if unused)
    int group_size = 1;

    size_t size() const { return trajectories.size(); }
};

struct AdvantageEstimate {
    std::vector<double> values;  // one scalar per trajectory, broadcast to all steps
    RlAlgorithm estimator = RlAlgorithm::ppo;
};

// Teacher reference distributions aligned to one student trajectory, one
// Gaussian per recorded transition.
struct AlignedReference {
    std::vector<GaussianParams> steps;
};

struct StepDiagnostics {
    double loss = 0.0;
    double ratio_mean = 1.0;
    double clip_fraction = 0.0;
    double kl_estimate = 0.0;
    double divergence_value = 0.0;
    double reward_mean = 0.0;
};

// Rolls out n_prompts groups of G trajectories; within a group the condition
// is shared and the noise streams differ. Teacher pairs are generated from
// the same initial noise draw when the reward spec needs them.
RolloutBuffer collect_rollouts(const StudentPolicy& policy, Rewarder& rewarder, int n_prompts,
                               int group_size, uint64_t seed);

// Whole-batch advantage normalization (mean / population std, 1e-8 in the
// denominator), the convention the surrogate baseline papers use.
AdvantageEstimate advantages_ppo(const RewardBatch& rewards);

// Group-relative advantages: per-group mean centering, optionally divided by
// the per-group population std (floored at 1e-8). normalize=true is the
// GRPO estimator, normalize=false the DR variant.
AdvantageEstimate advantages_group(const RewardBatch& rewards, int group_size, bool normalize);

AdvantageEstimate estimate_advantages(const RlConfig& config, const RolloutBuffer& buffer);

// Single-term clipped surrogate loss -min(r A, clip(r, 1-eps, 1+eps) A) with
// r = exp(new_logprob - old_logprob); clip_enabled=false gives -r A.
double clipped_surrogate(double new_logprob, double old_logprob, double advantage, double clip_eps,
                         bool clip_enabled);
// Same value plus d(loss)/d(new_logprob).
double clipped_surrogate_grad(double new_logprob, double old_logprob, double advantage,
                              double clip_eps, bool clip_enabled, double& dnew);

// Nonnegative KL estimator exp(d) - d - 1 with d = old - new.
double kl_penalty_k3(double old_logprob, double new_logprob);

// Teacher reference for every transition of a student trajectory: the
// aggregated teacher kernel over each coarse interval started at the
// trajectory's own state.
AlignedReference align_reference(const Denoiser& teacher, const NoiseSchedule& schedule,
                                 const CoarseSchedule& coarse, const Trajectory& student_traj);

// Reference taken from a frozen policy (the behavior-cloned initial student)
// evaluated at the trajectory's states.
AlignedReference reference_from_policy(const StudentPolicy& frozen, const Trajectory& student_traj);

// Mean over steps of the chosen divergence between the per-step student
// distributions and the aligned reference.
double divergence_penalty(const std::vector<TransitionDistribution>& student_steps,
                          const AlignedReference& reference, const DivergenceSpec& spec);

// Combined loss over a buffer evaluated at `flat_params` (policy shape from
// `policy`): mean over trajectories and steps of
//   clipped surrogate + kl_beta * k3 + div_lambda * divergence.
// Writes the analytic gradient when grad is non-empty. references may be
// empty when the config carries no divergence term.
double rl_loss(const StudentPolicy& policy, std::span<const double> flat_params,
               const RolloutBuffer& buffer, const AdvantageEstimate& advantages,
               const std::vector<AlignedReference>& references, const RlConfig& config,
               std::span<double> grad, StepDiagnostics* diagnostics);

// inner_epochs full-batch ascent steps on the combined loss.
StepDiagnostics update(StudentPolicy& policy, const RolloutBuffer& buffer,
                       const AdvantageEstimate& advantages,
                       const std::vector<AlignedReference>& references, const RlConfig& config,
                       AdamOptimizer& optimizer);

struct EvalSettings {
    int n_samples = 1024;
    int prdc_k = 5;
};

// One metrics CSV row per epoch.
struct EpochRow {
    int epoch = 0;
    double reward_mean = 0.0;
    double reward_std = 0.0;
    double fid = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double density = 0.0;
    double coverage = 0.0;
    double kl_k3 = 0.0;
    double div_penalty = 0.0;
    double clip_frac = 0.0;
    double ratio_mean = 0.0;
};

struct DistillResult {
    StudentPolicy policy;
    StudentPolicy best_policy;
    int best_epoch = 0;
    std::vector<EpochRow> log;
};

// Full distillation loop: collect, estimate advantages, update, evaluate.
// Deterministic given (config, seed); any sub-operation failure is rethrown
// with the epoch index.
DistillResult distill(const Denoiser& teacher, StudentPolicy student, Rewarder& rewarder,
                      const RlConfig& config, int epochs, uint64_t seed,
                      const EvalSettings& eval);

// Metric block used by distill and by the CLI evaluate/compare paths.
struct MetricBlock {
    double fid = 0.0;
    PRDCResult prdc;
    int covered_modes = 0;
};

// FID in the frozen seed-0 embedding space, PRDC on raw samples.
MetricBlock evaluate_samples(const std::vector<Vec>& real, const std::vector<Vec>& fake,
                             const DataSpec& data, const EvalSettings& eval);

// Conditioned student sample set with a fixed seed (prompts cycle over the
// condition ids).
std::vector<Vec> sample_student_finals(const StudentPolicy& policy, int n, uint64_t seed);

}  // namespace diffrl
