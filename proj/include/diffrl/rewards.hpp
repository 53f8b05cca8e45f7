// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <optional>

#include "diffrl/teacher.hpp"

namespace diffrl {

// Frozen random feature map (data dim -> 32, unit-norm output). Two seeds
// give the two "semantic" embedding spaces used by the reward ablation.
class Encoder {
public:
    Encoder(int data_dim, uint64_t seed, int embed_dim = 32, int hidden_dim = 64);

    Vec embed(const Vec& x) const;      // unit norm
    Vec raw_embed(const Vec& x) const;  // before normalization
    int embed_dim() const { return net_.output_dim(); }
    uint64_t seed() const { return seed_; }

    // Product of layer Frobenius norms; a (loose) Lipschitz bound on the
    // raw embedding since |tanh'| <= 1.
    double frobenius_bound() const;

private:
    Mlp net_;
    uint64_t seed_;
};

enum class RewardKind { teacher_cosine, mmd, align, energy };
enum class RewardNormalize { none, running_zscore };

const char* reward_kind_name(RewardKind kind);
RewardKind reward_kind_from_name(const std::string& name);

struct RewardComponent {
    RewardKind kind = RewardKind::teacher_cosine;
    double weight = 1.0;
    uint64_t encoder_seed = 0;  // selects the embedding space for teacher_cosine / mmd
};

struct RewardSpec {
    std::vector<RewardComponent> components;
    RewardNormalize normalize = RewardNormalize::none;

    void validate() const;
};

// Per-trajectory totals plus raw per-component values kept for logging.
struct RewardBatch {
    std::vector<double> total;
    std::vector<std::vector<double>> raw;  // raw[c][i]
};

// Cosine similarity of unit embeddings; symmetric, in [-1, 1].
double cosine_reward(const Encoder& enc, const Vec& x_student, const Vec& x_teacher);

// Unbiased squared maximum mean discrepancy with a Gaussian kernel.
double mmd2_unbiased(const std::vector<Vec>& a, const std::vector<Vec>& b, double bandwidth);

// Negated unbiased MMD^2 between embedded batches; batch sizes must be >= 2.
double mmd_reward(const Encoder& enc, const std::vector<Vec>& student_batch,
                  const std::vector<Vec>& teacher_batch, double bandwidth);

// Posterior probability of the conditioned mode given x: softmax of the
// negative squared distances to the mode means at the mixture scale.
double align_reward(const Vec& x, int condition, const DataSpec& data);

// True-mixture log-density rescaled so a mode center maps to 1 and the mode
// centroid (the ring center on the default task) maps to 0. Defined for the
// Gaussian-mixture dataset only.
double energy_reward(const Vec& x, const DataSpec& data);

// Streaming per-component standardization state (mean / variance over every
// value seen so far, std floored at 1e-6).
class RunningZScore {
public:
    explicit RunningZScore(size_t components) : stats_(components) {}
    void absorb(size_t component, std::span<const double> values);
    double standardize(size_t component, double value) const;
    size_t components() const { return stats_.size(); }

private:
    struct Welford {
        long long count = 0;
        double mean = 0.0;
        double m2 = 0.0;
    };
    std::vector<Welford> stats_;
};

// Weighted combination of per-trajectory component values. With
// running_zscore the batch is absorbed into `state` first, then every value
// is standardized before weighting.
RewardBatch combine(const RewardSpec& spec, const std::vector<std::vector<double>>& component_values,
                    RunningZScore* state);

// Bundles everything needed to score a rollout batch. Teacher pairing and
// the MMD estimator work on final states grouped by prompt; the per_step
// hook, when set, adds its accumulated value to the trajectory total so
// timestep-dependent rewards enter the cumulative objective.
class Rewarder {
public:
    Rewarder(RewardSpec spec, DataSpec data, const Denoiser* teacher, const NoiseSchedule* schedule,
             double mmd_bandwidth = 1.0);

    bool needs_teacher_pairs() const;
    const DataSpec& data() const { return data_; }
    const RewardSpec& spec() const { return spec_; }
    const Denoiser* teacher() const { return teacher_; }
    const NoiseSchedule* schedule() const { return schedule_; }
    const Encoder& encoder(uint64_t seed);

    std::function<double(const Trajectory&)> per_step_hook;

    RewardBatch score(const std::vector<Trajectory>& trajectories,
                      const std::vector<Vec>& teacher_finals, int group_size);

private:
    RewardSpec spec_;
    DataSpec data_;
    const Denoiser* teacher_;
    const NoiseSchedule* schedule_;
    double mmd_bandwidth_;
    std::map<uint64_t, Encoder> encoders_;
    RunningZScore zscore_;
};

}  // namespace diffrl
