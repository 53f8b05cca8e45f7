// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <json.hpp>

#include "diffrl/experiment.hpp"

namespace {

using namespace diffrl;

ExperimentConfig load_config(const std::string& path) {
    ExperimentConfig config = load_config_file(path);
    apply_env_overrides(config);
    return config;
}

int cmd_train_teacher(const std::string& config_path) {
    const ExperimentConfig config = load_config(config_path);
    const NoiseSchedule schedule = config.schedule.build();
    std::filesystem::path path;
    load_or_train_teacher(config, schedule, &path);
    std::cout << "teacher checkpoint: " << path.string() << "\n";
    return 0;
}

int cmd_distill(const std::string& config_path) {
    const ExperimentConfig config = load_config(config_path);
    const RunArtifacts artifacts = run_distill_experiment(config);
    std::cout << "run directory: " << artifacts.run_dir.string() << "\n";
    if (!artifacts.log.empty()) {
        const EpochRow& last = artifacts.log.back();
        std::cout << "final epoch " << last.epoch << ": reward_mean=" << format_metric(last.reward_mean)
                  << " fid=" << format_metric(last.fid) << "\n";
    }
    std::cout << "final fid=" << format_metric(artifacts.final_metrics.fid)
              << " covered_modes=" << artifacts.final_metrics.covered_modes << "\n";
    return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& config_path) {
    const ExperimentConfig config = load_config(config_path);
    const StudentPolicy policy = load_student(checkpoint_path);

    Rng rng(mix_seed(config.seed, 0xda7a));
    std::vector<Vec> real;
    for (int i = 0; i < config.eval.n_samples; ++i) real.push_back(config.data.sample(rng));
    const std::vector<Vec> fake =
        sample_student_finals(policy, config.eval.n_samples, mix_seed(config.seed, 0xe7a1));
    const MetricBlock m = evaluate_samples(real, fake, config.data, config.eval);

    nlohmann::json j = {{"fid", m.fid},
                        {"precision", m.prdc.precision},
                        {"recall", m.prdc.recall},
                        {"density", m.prdc.density},
                        {"coverage", m.prdc.coverage},
                        {"covered_modes", m.covered_modes}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_ablate(const std::string& axis_name, const std::string& config_path) {
    const AblationAxis axis = ablation_axis_from_name(axis_name);
    const ExperimentConfig config = load_config(config_path);
    run_ablation(config, axis, std::cout);
    return 0;
}

int cmd_compare(const std::string& config_path) {
    const ExperimentConfig config = load_config(config_path);
    run_compare(config, std::cout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"config-driven laboratory for few-step diffusion policy distillation"};
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, axis;

    CLI::App* train = app.add_subcommand("train-teacher", "train (or reuse) the teacher model");
    train->add_option("--config", config_path, "experiment config file")->required();

    CLI::App* distill = app.add_subcommand("distill", "run the RL distillation loop");
    distill->add_option("--config", config_path, "experiment config file")->required();

    CLI::App* evaluate = app.add_subcommand("evaluate", "metric block for a student checkpoint");
    evaluate->add_option("--checkpoint", checkpoint_path, "student checkpoint")->required();
    evaluate->add_option("--config", config_path, "experiment config file")->required();

    CLI::App* ablate = app.add_subcommand("ablate", "sweep one ablation axis");
    ablate->add_option("--axis", axis, "reward | algorithm | divergence")->required();
    ablate->add_option("--config", config_path, "experiment config file")->required();

    CLI::App* verify = app.add_subcommand("verify", "run the oracle check suite");

    CLI::App* compare = app.add_subcommand("compare", "distilled student vs truncated baseline");
    compare->add_option("--config", config_path, "experiment config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (train->parsed()) return cmd_train_teacher(config_path);
        if (distill->parsed()) return cmd_distill(config_path);
        if (evaluate->parsed()) return cmd_evaluate(checkpoint_path, config_path);
        if (ablate->parsed()) return cmd_ablate(axis, config_path);
        if (verify->parsed()) return verify_suite(std::cout) == 0 ? 0 : 2;
        if (compare->parsed()) return cmd_compare(config_path);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
