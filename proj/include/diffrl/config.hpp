// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include "diffrl/rl.hpp"

namespace diffrl {

struct ScheduleParams {
    ScheduleKind kind = ScheduleKind::linear;
    int steps = 50;
    double beta_min = 0.002;
    double beta_max = 0.4;

    NoiseSchedule build() const { return build_schedule(kind, steps, beta_min, beta_max); }
};

struct CoarseParams {
    int steps = 5;
    CoarseStrategy strategy = CoarseStrategy::uniform;
};

struct TeacherConfig {
    std::vector<int> hidden_widths{64, 64, 64};
    Activation activation = Activation::tanh_act;
    int time_features = 8;
    int train_steps = 20000;
    int batch_size = 128;
    double lr = 1e-3;
};

enum class BaselineKind { none, truncated_teacher };

// Full experiment description. Parsing is strict: unknown keys anywhere in
// the document are errors.
struct ExperimentConfig {
    DataSpec data = DataSpec::gmm_ring(8, 4.0, 0.15);
    ScheduleParams schedule;
    CoarseParams coarse;
    TeacherConfig teacher;
    RlConfig rl;
    RewardSpec reward{{{RewardKind::align, 1.0, 0}, {RewardKind::energy, 1.0, 0}},
                      RewardNormalize::none};
    EvalSettings eval;
    int epochs = 30;
    uint64_t seed = 1234;
    std::string output_dir = "runs";
    BaselineKind baseline = BaselineKind::none;

    void validate() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);

// Applies process-environment overrides (REDIF_SEED replaces the seed).
void apply_env_overrides(ExperimentConfig& config);

// Canonical JSON snapshot (object keys sorted); the inverse of parse_config.
nlohmann::json to_json(const ExperimentConfig& config);

// FNV-1a over the canonical serialization; stable under key reordering in
// the source document.
uint64_t config_hash(const ExperimentConfig& config);

}  // namespace diffrl
