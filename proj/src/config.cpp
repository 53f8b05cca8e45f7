// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include "diffrl/config.hpp"

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <set>

namespace diffrl {

namespace {

using nlohmann::json;

// Rejects keys that no reader consumed; every checker below registers the
// keys it understands.
void require_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw std::invalid_argument("config: " + path + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) {
            throw std::invalid_argument("config: unknown key '" + path + key + "'");
        }
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

DataSpec parse_data(const json& j) {
    require_keys(j, "data.", {"kind", "dim", "mode_count", "radius", "mode_std"});
    const std::string kind = get_or<std::string>(j, "kind", "gmm-ring");
    if (kind == "gmm-ring") {
        return DataSpec::gmm_ring(get_or(j, "mode_count", 8), get_or(j, "radius", 4.0),
                                  get_or(j, "mode_std", 0.15), get_or(j, "dim", 2));
    }
    if (kind == "checkerboard") {
        if (j.contains("dim") || j.contains("mode_count") || j.contains("radius")) {
            // The board geometry is fixed; reject silently ignored knobs.
            throw std::invalid_argument("config: checkerboard accepts no geometry keys");
        }
        return DataSpec::checkerboard();
    }
    throw std::invalid_argument("config: unknown data kind '" + kind + "'");
}

ScheduleKind parse_schedule_kind(const std::string& s) {
    if (s == "linear") return ScheduleKind::linear;
    if (s == "cosine") return ScheduleKind::cosine;
    throw std::invalid_argument("config: unknown schedule kind '" + s + "'");
}

Activation parse_activation(const std::string& s) {
    if (s == "tanh") return Activation::tanh_act;
    if (s == "smooth-relu") return Activation::smooth_relu;
    throw std::invalid_argument("config: unknown activation '" + s + "'");
}

DivergenceSpec parse_divergence(const json& j) {
    require_keys(j, "rl.divergence.", {"kind", "alpha", "lambda"});
    DivergenceSpec d;
    d.kind = divergence_kind_from_name(j.at("kind").get<std::string>());
    d.alpha = get_or(j, "alpha", 0.5);
    d.lambda = get_or(j, "lambda", 1.0);
    d.validate();
    return d;
}

RewardSpec parse_reward(const json& j) {
    require_keys(j, "reward.", {"components", "normalize"});
    RewardSpec spec;
    spec.components.clear();
    for (const auto& c : j.at("components")) {
        require_keys(c, "reward.components[].", {"kind", "weight", "encoder_seed"});
        RewardComponent comp;
        comp.kind = reward_kind_from_name(c.at("kind").get<std::string>());
        comp.weight = get_or(c, "weight", 1.0);
        comp.encoder_seed = get_or<uint64_t>(c, "encoder_seed", 0);
        spec.components.push_back(comp);
    }
    const std::string norm = get_or<std::string>(j, "normalize", "none");
    if (norm == "none") {
        spec.normalize = RewardNormalize::none;
    } else if (norm == "running_zscore") {
        spec.normalize = RewardNormalize::running_zscore;
    } else {
        throw std::invalid_argument("config: unknown reward normalize '" + norm + "'");
    }
    spec.validate();
    return spec;
}

}  // namespace

void ExperimentConfig::validate() const {
    data.validate();
    rl.validate();
    reward.validate();
    if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
    if (eval.n_samples < eval.prdc_k + 1) throw std::invalid_argument("config: eval.n_samples too small");
    if (coarse.steps < 1 || coarse.steps >= schedule.steps) {
        throw std::invalid_argument("config: coarse.K must satisfy 1 <= K < schedule.T");
    }
    if (output_dir.empty()) throw std::invalid_argument("config: output_dir must not be empty");
    for (const auto& c : reward.components) {
        if (c.kind == RewardKind::energy && data.kind != DataKind::gmm_ring) {
            throw std::invalid_argument("config: energy reward requires the gmm-ring dataset");
        }
    }
}

ExperimentConfig parse_config(const json& j) {
    require_keys(j, "", {"data", "schedule", "coarse", "teacher", "rl", "reward", "eval", "epochs",
                         "seed", "output_dir", "baseline"});
    ExperimentConfig c;
    if (j.contains("data")) c.data = parse_data(j.at("data"));

    if (j.contains("schedule")) {
        const json& s = j.at("schedule");
        require_keys(s, "schedule.", {"kind", "T", "beta_min", "beta_max"});
        c.schedule.kind = parse_schedule_kind(get_or<std::string>(s, "kind", "linear"));
        c.schedule.steps = get_or(s, "T", 50);
        c.schedule.beta_min = get_or(s, "beta_min", 0.002);
        c.schedule.beta_max = get_or(s, "beta_max", 0.4);
    }
    if (j.contains("coarse")) {
        const json& s = j.at("coarse");
        require_keys(s, "coarse.", {"K", "strategy"});
        c.coarse.steps = get_or(s, "K", 5);
        const std::string strat = get_or<std::string>(s, "strategy", "uniform");
        if (strat == "uniform") {
            c.coarse.strategy = CoarseStrategy::uniform;
        } else if (strat == "quadratic") {
            c.coarse.strategy = CoarseStrategy::quadratic;
        } else {
            throw std::invalid_argument("config: unknown coarse strategy '" + strat + "'");
        }
    }
    if (j.contains("teacher")) {
        const json& s = j.at("teacher");
        require_keys(s, "teacher.",
                     {"hidden_widths", "activation", "time_features", "train_steps", "batch_size", "lr"});
        c.teacher.hidden_widths = get_or(s, "hidden_widths", std::vector<int>{64, 64, 64});
        c.teacher.activation = parse_activation(get_or<std::string>(s, "activation", "tanh"));
        c.teacher.time_features = get_or(s, "time_features", 8);
        c.teacher.train_steps = get_or(s, "train_steps", 20000);
        c.teacher.batch_size = get_or(s, "batch_size", 128);
        c.teacher.lr = get_or(s, "lr", 1e-3);
    }
    if (j.contains("rl")) {
        const json& s = j.at("rl");
        require_keys(s, "rl.",
                     {"algorithm", "clip_eps", "lr", "inner_epochs", "group_size", "n_prompts",
                      "kl_beta", "div_lambda", "divergence", "clip_enabled", "learn_stds", "reference",
                      "target_kl"});
        c.rl.algorithm = rl_algorithm_from_name(get_or<std::string>(s, "algorithm", "grpo"));
        c.rl.clip_eps = get_or(s, "clip_eps", 0.2);
        c.rl.lr = get_or(s, "lr", 1.5e-3);
        c.rl.inner_epochs = get_or(s, "inner_epochs", 4);
        c.rl.group_size = get_or(s, "group_size", 8);
        c.rl.n_prompts = get_or(s, "n_prompts", 8);
        c.rl.kl_beta = get_or(s, "kl_beta", 0.05);
        c.rl.div_lambda = get_or(s, "div_lambda", 0.3);
        if (s.contains("divergence")) {
            if (s.at("divergence").is_null()) {
                c.rl.divergence.reset();
            } else {
                c.rl.divergence = parse_divergence(s.at("divergence"));
            }
        }
        c.rl.clip_enabled = get_or(s, "clip_enabled", true);
        c.rl.target_kl = get_or(s, "target_kl", 0.05);
        c.rl.learn_stds = get_or(s, "learn_stds", true);
        const std::string ref = get_or<std::string>(s, "reference", "teacher");
        if (ref == "teacher") {
            c.rl.reference = ReferencePolicy::teacher;
        } else if (ref == "initial_student") {
            c.rl.reference = ReferencePolicy::initial_student;
        } else {
            throw std::invalid_argument("config: unknown rl reference '" + ref + "'");
        }
    }
    if (j.contains("reward")) c.reward = parse_reward(j.at("reward"));
    if (j.contains("eval")) {
        const json& s = j.at("eval");
        require_keys(s, "eval.", {"n_samples", "prdc_k"});
        c.eval.n_samples = get_or(s, "n_samples", 1024);
        c.eval.prdc_k = get_or(s, "prdc_k", 5);
    }
    c.epochs = get_or(j, "epochs", 30);
    c.seed = get_or<uint64_t>(j, "seed", 1234);
    c.output_dir = get_or<std::string>(j, "output_dir", "runs");
    const std::string baseline = get_or<std::string>(j, "baseline", "none");
    if (baseline == "none") {
        c.baseline = BaselineKind::none;
    } else if (baseline == "truncated_teacher") {
        c.baseline = BaselineKind::truncated_teacher;
    } else {
        throw std::invalid_argument("config: unknown baseline '" + baseline + "'");
    }
    c.validate();
    return c;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("config: cannot open " + path);
    json j;
    try {
        is >> j;
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config: parse error in " + path + ": " + e.what());
    }
    return parse_config(j);
}

void apply_env_overrides(ExperimentConfig& config) {
    if (const char* env = std::getenv("REDIF_SEED")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end == env || *end != '\0') {
            throw std::invalid_argument("REDIF_SEED must be an unsigned integer");
        }
        config.seed = v;
    }
}

nlohmann::json to_json(const ExperimentConfig& c) {
    json j;
    j["data"] = {{"kind", c.data.kind == DataKind::gmm_ring ? "gmm-ring" : "checkerboard"}};
    if (c.data.kind == DataKind::gmm_ring) {
        j["data"]["dim"] = c.data.dim;
        j["data"]["mode_count"] = c.data.mode_count;
        j["data"]["radius"] = c.data.radius;
        j["data"]["mode_std"] = c.data.mode_std;
    }
    j["schedule"] = {{"kind", c.schedule.kind == ScheduleKind::linear ? "linear" : "cosine"},
                     {"T", c.schedule.steps},
                     {"beta_min", c.schedule.beta_min},
                     {"beta_max", c.schedule.beta_max}};
    j["coarse"] = {{"K", c.coarse.steps},
                   {"strategy", c.coarse.strategy == CoarseStrategy::uniform ? "uniform" : "quadratic"}};
    j["teacher"] = {{"hidden_widths", c.teacher.hidden_widths},
                    {"activation", c.teacher.activation == Activation::tanh_act ? "tanh" : "smooth-relu"},
                    {"time_features", c.teacher.time_features},
                    {"train_steps", c.teacher.train_steps},
                    {"batch_size", c.teacher.batch_size},
                    {"lr", c.teacher.lr}};
    j["rl"] = {{"algorithm", rl_algorithm_name(c.rl.algorithm)},
               {"clip_eps", c.rl.clip_eps},
               {"lr", c.rl.lr},
               {"inner_epochs", c.rl.inner_epochs},
               {"group_size", c.rl.group_size},
               {"n_prompts", c.rl.n_prompts},
               {"kl_beta", c.rl.kl_beta},
               {"div_lambda", c.rl.div_lambda},
               {"clip_enabled", c.rl.clip_enabled},
               {"target_kl", c.rl.target_kl},
               {"learn_stds", c.rl.learn_stds},
               {"reference", c.rl.reference == ReferencePolicy::teacher ? "teacher" : "initial_student"}};
    if (c.rl.divergence) {
        json d = {{"kind", divergence_kind_name(c.rl.divergence->kind)}};
        if (c.rl.divergence->kind == DivergenceKind::renyi) d["alpha"] = c.rl.divergence->alpha;
        if (c.rl.divergence->kind == DivergenceKind::power) d["lambda"] = c.rl.divergence->lambda;
        j["rl"]["divergence"] = d;
    } else {
        j["rl"]["divergence"] = nullptr;
    }
    j["reward"] = json::object();
    j["reward"]["normalize"] =
        c.reward.normalize == RewardNormalize::none ? "none" : "running_zscore";
    j["reward"]["components"] = json::array();
    for (const auto& comp : c.reward.components) {
        j["reward"]["components"].push_back({{"kind", reward_kind_name(comp.kind)},
                                             {"weight", comp.weight},
                                             {"encoder_seed", comp.encoder_seed}});
    }
    j["eval"] = {{"n_samples", c.eval.n_samples}, {"prdc_k", c.eval.prdc_k}};
    j["epochs"] = c.epochs;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["baseline"] = c.baseline == BaselineKind::none ? "none" : "truncated_teacher";
    return j;
}

uint64_t config_hash(const ExperimentConfig& config) {
    const std::string canonical = to_json(config).dump();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace diffrl
