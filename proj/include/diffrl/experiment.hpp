// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>

#include "diffrl/checkpoint.hpp"
#include "diffrl/config.hpp"
#include "diffrl/kernel_grid.hpp"

namespace diffrl {

inline constexpr const char* kCodeVersion = "diffrl 0.1.0";
inline constexpr const char* kMetricsCsvHeader =
    "epoch,reward_mean,reward_std,fid,precision,recall,density,coverage,kl_k3,div_penalty,"
    "clip_frac,ratio_mean";

// Environment override honored by every subcommand.
inline constexpr const char* kSeedEnvVar = "REDIF_SEED";

std::string format_metric(double v);
std::string metrics_csv(const std::vector<EpochRow>& rows);

struct RunManifest {
    uint64_t config_hash = 0;
    std::string code_version = kCodeVersion;
    std::string started_at;
    std::string finished_at;
    int epochs_logged = 0;
    std::vector<std::string> checkpoints;
};

struct RunArtifacts {
    std::filesystem::path run_dir;
    MetricBlock final_metrics;
    std::optional<MetricBlock> baseline_metrics;
    std::vector<EpochRow> log;
};

// Trains the teacher for this config, or loads it from the per-config cache
// under <output_dir>/teachers/. Loading is bit-exact, so downstream runs do
// not depend on whether the cache was warm. `stats` is filled only when the
// teacher is actually trained.
Denoiser load_or_train_teacher(const ExperimentConfig& config, const NoiseSchedule& schedule,
                               std::filesystem::path* cache_path = nullptr,
                               TrainStats* stats = nullptr);

// Full distillation run: teacher, behavior cloning, RL, metric emission.
// Artifacts land under <output_dir>/<run-id>/ with run-id derived from the
// config hash.
RunArtifacts run_distill_experiment(const ExperimentConfig& config);

// Teacher restricted to the coarse grid: each coarse step samples from the
// aggregated interval kernel. No retraining, no RL.
std::vector<Vec> sample_baseline_finals(const Denoiser& teacher, const NoiseSchedule& schedule,
                                        const CoarseSchedule& coarse, int n, uint64_t seed);

MetricBlock run_baseline(const Denoiser& teacher, const NoiseSchedule& schedule,
                         const CoarseSchedule& coarse, const DataSpec& data,
                         const EvalSettings& eval, uint64_t seed);

enum class AblationAxis { reward, algorithm, divergence };
AblationAxis ablation_axis_from_name(const std::string& name);

struct AblationRun {
    std::string name;
    ExperimentConfig config;
};

// The swept grid for one axis; every variant differs from the base config
// only on that axis.
std::vector<AblationRun> ablation_grid(const ExperimentConfig& base, AblationAxis axis);

// Runs the grid, one run directory per variant plus a summary CSV.
std::filesystem::path run_ablation(const ExperimentConfig& base, AblationAxis axis,
                                   std::ostream& log);

// Distilled student vs truncated-teacher baseline vs teacher; prints the
// comparison table and returns (student fid, baseline fid).
std::pair<double, double> run_compare(const ExperimentConfig& config, std::ostream& os);

// Fast self-contained oracle checks (quadrature vs closed forms, brute-force
// PRDC, finite-difference gradients, kernel-grid consistency, estimator
// algebra). Prints one line per check; returns the number of failures.
int verify_suite(std::ostream& os);

}  // namespace diffrl
