// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <fstream>
#include <json.hpp>

#include "diffrl/experiment.hpp"

using namespace diffrl;
using nlohmann::json;

TEST_SUITE_BEGIN("config");

namespace {

const char* kSample = R"({
  "data": {"kind": "gmm-ring", "dim": 2, "mode_count": 8, "radius": 4.0, "mode_std": 0.15},
  "schedule": {"kind": "linear", "T": 50, "beta_min": 0.002, "beta_max": 0.4},
  "coarse": {"K": 5, "strategy": "uniform"},
  "rl": {"algorithm": "dr_grpo", "group_size": 4, "divergence": {"kind": "renyi", "alpha": 0.5}},
  "reward": {"components": [{"kind": "teacher_cosine", "weight": 1.0},
                            {"kind": "align", "weight": 0.5}],
             "normalize": "running_zscore"},
  "epochs": 7,
  "seed": 99,
  "output_dir": "runs",
  "baseline": "truncated_teacher"
})";

}  // namespace

TEST_CASE("parse a full document") {
    const ExperimentConfig c = parse_config(json::parse(kSample));
    CHECK(c.data.mode_count == 8);
    CHECK(c.schedule.steps == 50);
    CHECK(c.coarse.steps == 5);
    CHECK(c.rl.algorithm == RlAlgorithm::dr_grpo);
    CHECK(c.rl.group_size == 4);
    REQUIRE(c.rl.divergence.has_value());
    CHECK(c.rl.divergence->kind == DivergenceKind::renyi);
    CHECK(c.reward.components.size() == 2);
    CHECK(c.reward.normalize == RewardNormalize::running_zscore);
    CHECK(c.epochs == 7);
    CHECK(c.seed == 99);
    CHECK(c.baseline == BaselineKind::truncated_teacher);
    // untouched blocks keep their defaults
    CHECK(c.teacher.train_steps == 20000);
    CHECK(c.eval.n_samples == 1024);
}

TEST_CASE("unknown keys are rejected with their path") {
    json j = json::parse(kSample);
    j["turbo"] = true;
    CHECK_THROWS_WITH_AS(parse_config(j), doctest::Contains("turbo"), std::invalid_argument);

    json nested = json::parse(kSample);
    nested["rl"]["momentum"] = 0.9;
    CHECK_THROWS_WITH_AS(parse_config(nested), doctest::Contains("rl.momentum"), std::invalid_argument);
}

TEST_CASE("semantic validation") {
    json j = json::parse(kSample);
    j["coarse"]["K"] = 50;
    CHECK_THROWS_AS(parse_config(j), std::invalid_argument);

    json bad_div = json::parse(kSample);
    bad_div["rl"]["divergence"] = {{"kind", "renyi"}, {"alpha", 1.0}};
    CHECK_THROWS_AS(parse_config(bad_div), std::invalid_argument);

    json energy_checker = json::parse(kSample);
    energy_checker["data"] = {{"kind", "checkerboard"}};
    energy_checker["reward"]["components"] = {{{"kind", "energy"}, {"weight", 1.0}}};
    CHECK_THROWS_AS(parse_config(energy_checker), std::invalid_argument);

    json geom = json::parse(kSample);
    geom["data"] = {{"kind", "checkerboard"}, {"radius", 3.0}};
    CHECK_THROWS_AS(parse_config(geom), std::invalid_argument);
}

TEST_CASE("hash is stable under key reordering and sensitive to values") {
    const ExperimentConfig a = parse_config(json::parse(kSample));
    // same document, different key order
    const char* reordered = R"({
      "seed": 99,
      "epochs": 7,
      "baseline": "truncated_teacher",
      "output_dir": "runs",
      "reward": {"normalize": "running_zscore",
                 "components": [{"weight": 1.0, "kind": "teacher_cosine"},
                                {"weight": 0.5, "kind": "align"}]},
      "rl": {"divergence": {"alpha": 0.5, "kind": "renyi"}, "group_size": 4, "algorithm": "dr_grpo"},
      "coarse": {"strategy": "uniform", "K": 5},
      "schedule": {"beta_max": 0.4, "beta_min": 0.002, "T": 50, "kind": "linear"},
      "data": {"mode_std": 0.15, "radius": 4.0, "mode_count": 8, "dim": 2, "kind": "gmm-ring"}
    })";
    const ExperimentConfig b = parse_config(json::parse(reordered));
    CHECK(config_hash(a) == config_hash(b));

    ExperimentConfig c = a;
    c.seed = 100;
    CHECK(config_hash(c) != config_hash(a));
    ExperimentConfig d = a;
    d.rl.clip_eps = 0.21;
    CHECK(config_hash(d) != config_hash(a));
}

TEST_CASE("round-trip through the canonical snapshot") {
    const ExperimentConfig a = parse_config(json::parse(kSample));
    const ExperimentConfig b = parse_config(to_json(a));
    CHECK(config_hash(a) == config_hash(b));
    CHECK(to_json(a).dump() == to_json(b).dump());
}

TEST_CASE("missing config file is a validation error") {
    CHECK_THROWS_AS(load_config_file("/nonexistent/config.json"), std::invalid_argument);
    // malformed JSON too
    const std::string path = "bad_config.json";
    std::ofstream(path) << "{not json";
    CHECK_THROWS_AS(load_config_file(path), std::invalid_argument);
    std::remove(path.c_str());
}

TEST_CASE("environment seed override") {
    ExperimentConfig cfg;
    cfg.seed = 1;
    setenv("REDIF_SEED", "98765", 1);
    apply_env_overrides(cfg);
    CHECK(cfg.seed == 98765);
    setenv("REDIF_SEED", "not-a-number", 1);
    CHECK_THROWS_AS(apply_env_overrides(cfg), std::invalid_argument);
    unsetenv("REDIF_SEED");
    apply_env_overrides(cfg);
    CHECK(cfg.seed == 98765);  // untouched without the variable
}

TEST_CASE("metrics csv schema is pinned") {
    CHECK(std::string(kMetricsCsvHeader) ==
          "epoch,reward_mean,reward_std,fid,precision,recall,density,coverage,kl_k3,div_penalty,"
          "clip_frac,ratio_mean");
    EpochRow row;
    row.epoch = 3;
    row.reward_mean = 0.5;
    const std::string csv = metrics_csv({row});
    CHECK(csv.substr(0, csv.find('\n')) == kMetricsCsvHeader);
    CHECK(csv.find("\n3,0.5,0,") != std::string::npos);
}

TEST_CASE("ablation grids differ only on the swept axis") {
    ExperimentConfig base;
    base.epochs = 1;

    const auto div_runs = ablation_grid(base, AblationAxis::divergence);
    REQUIRE(div_runs.size() == 5);
    CHECK(div_runs[0].name == "kl");
    CHECK(div_runs[4].name == "renyi");
    for (const auto& run : div_runs) {
        // the whole grid pins the reference policy; runs differ only on the
        // divergence itself
        CHECK(run.config.rl.reference == ReferencePolicy::initial_student);
        json the_run = to_json(run.config);
        json ref = to_json(div_runs[0].config);
        the_run["rl"].erase("divergence");
        ref["rl"].erase("divergence");
        CHECK(the_run.dump() == ref.dump());
    }

    const auto alg_runs = ablation_grid(base, AblationAxis::algorithm);
    REQUIRE(alg_runs.size() == 4);
    for (const auto& run : alg_runs) {
        json the_run = to_json(run.config);
        json ref = to_json(base);
        the_run["rl"].erase("algorithm");
        the_run["rl"].erase("clip_enabled");
        ref["rl"].erase("algorithm");
        ref["rl"].erase("clip_enabled");
        CHECK(the_run.dump() == ref.dump());
    }

    const auto reward_runs = ablation_grid(base, AblationAxis::reward);
    REQUIRE(reward_runs.size() == 7);
    for (const auto& run : reward_runs) {
        json the_run = to_json(run.config);
        json ref = to_json(base);
        the_run.erase("reward");
        ref.erase("reward");
        CHECK(the_run.dump() == ref.dump());
    }
    CHECK_THROWS_AS(ablation_axis_from_name("optimizer"), std::invalid_argument);
}

TEST_SUITE_END();
