// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include "diffrl/experiment.hpp"

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <ostream>
#include <sstream>

namespace diffrl {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_metric(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string metrics_csv(const std::vector<EpochRow>& rows) {
    std::string out = kMetricsCsvHeader;
    out += '\n';
    for (const EpochRow& r : rows) {
        out += std::to_string(r.epoch);
        for (double v : {r.reward_mean, r.reward_std, r.fid, r.precision, r.recall, r.density,
                         r.coverage, r.kl_k3, r.div_penalty, r.clip_frac, r.ratio_mean}) {
            out += ',';
            out += format_metric(v);
        }
        out += '\n';
    }
    return out;
}

namespace {

std::string hex64(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
    return buf;
}

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%FT%TZ");
    return os.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << content;
    if (!os) throw std::runtime_error("write failure for " + path.string());
}

json metric_block_json(const MetricBlock& block) {
    return json{{"fid", block.fid},
                {"precision", block.prdc.precision},
                {"recall", block.prdc.recall},
                {"density", block.prdc.density},
                {"coverage", block.prdc.coverage},
                {"covered_modes", block.covered_modes}};
}

uint64_t teacher_cache_key(const ExperimentConfig& config) {
    // Only the fields the teacher depends on.
    ExperimentConfig reduced = config;
    reduced.rl = RlConfig{};
    reduced.reward = ExperimentConfig{}.reward;
    reduced.eval = EvalSettings{};
    reduced.epochs = 0;
    reduced.coarse = CoarseParams{};
    reduced.baseline = BaselineKind::none;
    reduced.output_dir = "";
    // validate() rejects empty output_dir; hash the JSON directly instead.
    json j = to_json(reduced);
    const std::string canonical = j.dump();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<Vec> draw_real_set(const DataSpec& data, int n, uint64_t seed) {
    Rng rng(mix_seed(seed, 0xda7a));
    std::vector<Vec> real;
    real.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) real.push_back(data.sample(rng));
    return real;
}

}  // namespace

Denoiser load_or_train_teacher(const ExperimentConfig& config, const NoiseSchedule& schedule,
                               fs::path* cache_path, TrainStats* stats) {
    const fs::path cache_dir = fs::path(config.output_dir) / "teachers";
    fs::create_directories(cache_dir);
    const fs::path path = cache_dir / ("teacher-" + hex64(teacher_cache_key(config)) + ".ckpt");
    if (cache_path) *cache_path = path;
    if (fs::exists(path)) {
        return load_teacher(path.string()).net;
    }
    Denoiser net = make_teacher_net(config.data.dim, config.teacher.hidden_widths,
                                    config.teacher.time_features, config.teacher.activation,
                                    config.seed);
    TeacherTrainConfig tc{config.teacher.train_steps, config.teacher.batch_size, config.teacher.lr};
    net = train_teacher(config.data, schedule, std::move(net), tc, config.seed, stats);
    save_teacher(path.string(), net, schedule, config.seed);
    return net;
}

std::vector<Vec> sample_baseline_finals(const Denoiser& teacher, const NoiseSchedule& schedule,
                                        const CoarseSchedule& coarse, int n, uint64_t seed) {
    const int d = teacher.data_dim;
    const int K = coarse.steps;
    // One network evaluation per coarse step: the clean-sample prediction is
    // held fixed across each interval, giving the skip-posterior transition
    // q(x_lo | x_hi, x0_hat). With K = T this is exact single-step sampling.
    std::vector<double> mean_x(static_cast<size_t>(K)), mean_eps(static_cast<size_t>(K)),
        stddev(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) {
        const int hi = coarse.taus[static_cast<size_t>(k)];
        const int lo = coarse.taus[static_cast<size_t>(k) + 1];
        const IntervalCoefs c = compose_interval(schedule, hi, lo);
        const double abar = schedule.alpha_bar(hi);
        mean_x[static_cast<size_t>(k)] = c.state_coef + c.x0_coef / std::sqrt(abar);
        mean_eps[static_cast<size_t>(k)] = -c.x0_coef * std::sqrt(1.0 - abar) / std::sqrt(abar);
        stddev[static_cast<size_t>(k)] = std::sqrt(std::max(c.variance, 0.0));
    }

    std::vector<Vec> finals;
    finals.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng(mix_seed(seed, static_cast<uint64_t>(i)));
        Vec x = rng.normal_vec(d);
        for (int k = 0; k < K; ++k) {
            const Vec eps = teacher.predict(x, coarse.taus[static_cast<size_t>(k)]);
            for (int j = 0; j < d; ++j) {
                x[static_cast<size_t>(j)] = mean_x[static_cast<size_t>(k)] * x[static_cast<size_t>(j)] +
                                            mean_eps[static_cast<size_t>(k)] * eps[static_cast<size_t>(j)] +
                                            stddev[static_cast<size_t>(k)] * rng.normal();
            }
        }
        finals.push_back(std::move(x));
    }
    return finals;
}

MetricBlock run_baseline(const Denoiser& teacher, const NoiseSchedule& schedule,
                         const CoarseSchedule& coarse, const DataSpec& data,
                         const EvalSettings& eval, uint64_t seed) {
    const std::vector<Vec> real = draw_real_set(data, eval.n_samples, seed);
    const std::vector<Vec> fake =
        sample_baseline_finals(teacher, schedule, coarse, eval.n_samples, mix_seed(seed, 0xba5e));
    return evaluate_samples(real, fake, data, eval);
}

RunArtifacts run_distill_experiment(const ExperimentConfig& config) {
    config.validate();
    const std::string started = iso_now();

    const NoiseSchedule schedule = config.schedule.build();
    const CoarseSchedule coarse =
        build_coarse_schedule(schedule.steps, config.coarse.steps, config.coarse.strategy);

    const fs::path run_dir = fs::path(config.output_dir) / ("run-" + hex64(config_hash(config)));
    fs::create_directories(run_dir);

    fs::path teacher_path;
    const Denoiser teacher = load_or_train_teacher(config, schedule, &teacher_path);

    StudentPolicy student = init_from_teacher(teacher, schedule, coarse, config.data.mode_count);
    Rewarder rewarder(config.reward, config.data, &teacher, &schedule);

    DistillResult result =
        distill(teacher, std::move(student), rewarder, config.rl, config.epochs, config.seed, config.eval);

    // Final metric block from the final policy, on the same reference set the
    // per-epoch metrics used.
    const std::vector<Vec> real = draw_real_set(config.data, config.eval.n_samples, config.seed);
    const std::vector<Vec> finals =
        sample_student_finals(result.policy, config.eval.n_samples, mix_seed(config.seed, 0xe7a1));
    RunArtifacts artifacts;
    artifacts.run_dir = run_dir;
    artifacts.final_metrics = evaluate_samples(real, finals, config.data, config.eval);
    artifacts.log = result.log;

    if (config.baseline == BaselineKind::truncated_teacher) {
        artifacts.baseline_metrics =
            run_baseline(teacher, schedule, coarse, config.data, config.eval, config.seed);
    }

    // Artifact emission.
    write_file(run_dir / "config.json", to_json(config).dump(2) + "\n");
    write_file(run_dir / "metrics.csv", metrics_csv(result.log));
    std::string curves = "epoch,series,value\n";
    for (const EpochRow& r : result.log) {
        curves += std::to_string(r.epoch) + ",reward_mean," + format_metric(r.reward_mean) + "\n";
        curves += std::to_string(r.epoch) + ",fid," + format_metric(r.fid) + "\n";
    }
    write_file(run_dir / "curves.csv", curves);

    const fs::path final_ckpt = run_dir / "student_final.ckpt";
    const fs::path best_ckpt = run_dir / "student_best.ckpt";
    save_student(final_ckpt.string(), result.policy, config.seed);
    save_student(best_ckpt.string(), result.best_policy, config.seed);

    json final_json = metric_block_json(artifacts.final_metrics);
    final_json["best_epoch"] = result.best_epoch;
    if (artifacts.baseline_metrics) {
        final_json["baseline"] = metric_block_json(*artifacts.baseline_metrics);
    }
    // Reward-up / quality-down decorrelation flag over the run's curves.
    constexpr int kMonitorWindow = 5;
    if (result.log.size() >= 2 * kMonitorWindow) {
        std::vector<double> reward_curve, fid_curve;
        for (const EpochRow& r : result.log) {
            reward_curve.push_back(r.reward_mean);
            fid_curve.push_back(r.fid);
        }
        const auto flag = overopt_monitor(reward_curve, fid_curve, kMonitorWindow);
        final_json["overopt_epoch"] = flag ? json(*flag + 1) : json(nullptr);
    }
    write_file(run_dir / "final_metrics.json", final_json.dump(2) + "\n");

    RunManifest manifest;
    manifest.config_hash = config_hash(config);
    manifest.started_at = started;
    manifest.finished_at = iso_now();
    manifest.epochs_logged = static_cast<int>(result.log.size());
    manifest.checkpoints = {teacher_path.string(), final_ckpt.string(), best_ckpt.string()};
    json mj = {{"config_hash", hex64(manifest.config_hash)},
               {"code_version", manifest.code_version},
               {"started_at", manifest.started_at},
               {"finished_at", manifest.finished_at},
               {"epochs_logged", manifest.epochs_logged},
               {"checkpoints", manifest.checkpoints},
               {"final_metrics", final_json}};
    write_file(run_dir / "manifest.json", mj.dump(2) + "\n");

    return artifacts;
}

AblationAxis ablation_axis_from_name(const std::string& name) {
    if (name == "reward") return AblationAxis::reward;
    if (name == "algorithm") return AblationAxis::algorithm;
    if (name == "divergence") return AblationAxis::divergence;
    throw std::invalid_argument("unknown ablation axis: " + name);
}

std::vector<AblationRun> ablation_grid(const ExperimentConfig& base, AblationAxis axis) {
    std::vector<AblationRun> runs;
    auto push = [&](const std::string& name, ExperimentConfig cfg) {
        cfg.validate();
        runs.push_back({name, std::move(cfg)});
    };
    switch (axis) {
        case AblationAxis::reward: {
            auto with = [&](std::vector<RewardComponent> comps) {
                ExperimentConfig cfg = base;
                cfg.reward.components = std::move(comps);
                return cfg;
            };
            const RewardComponent cos_a{RewardKind::teacher_cosine, 1.0, 0};
            const RewardComponent cos_b{RewardKind::teacher_cosine, 1.0, 1};
            const RewardComponent align{RewardKind::align, 1.0, 0};
            const RewardComponent energy{RewardKind::energy, 1.0, 0};
            push("cos_a", with({cos_a}));
            push("cos_b", with({cos_b}));
            push("cos_a+cos_b", with({cos_a, cos_b}));
            push("cos_a+align", with({cos_a, align}));
            push("cos_a+cos_b+align", with({cos_a, cos_b, align}));
            push("cos_a+cos_b+align+energy", with({cos_a, cos_b, align, energy}));
            push("cos_a+align+energy", with({cos_a, align, energy}));
            break;
        }
        case AblationAxis::algorithm: {
            auto with = [&](RlAlgorithm a, bool clip) {
                ExperimentConfig cfg = base;
                cfg.rl.algorithm = a;
                cfg.rl.clip_enabled = clip;
                return cfg;
            };
            push("ppo", with(RlAlgorithm::ppo, true));
            push("grpo", with(RlAlgorithm::grpo, true));
            push("dr_grpo", with(RlAlgorithm::dr_grpo, true));
            push("dr_grpo_noclip", with(RlAlgorithm::dr_grpo, false));
            break;
        }
        case AblationAxis::divergence: {
            // The whole grid regularizes toward the behavior-cloned initial
            // policy. That reference shares the student's per-step scale, so
            // the density-ratio kinds (chi2, power) stay inside their
            // variance domain; against the state-dependent teacher kernels
            // they hit 2 std_q^2 > std_p^2 violations at init.
            auto with = [&](DivergenceSpec spec) {
                ExperimentConfig cfg = base;
                cfg.rl.divergence = spec;
                cfg.rl.reference = ReferencePolicy::initial_student;
                if (cfg.rl.div_lambda <= 0.0) cfg.rl.div_lambda = 0.1;
                return cfg;
            };
            push("kl", with({DivergenceKind::kl}));
            push("js", with({DivergenceKind::js}));
            push("chi2", with({DivergenceKind::chi2}));
            push("power", with({DivergenceKind::power, 0.5, 1.0}));
            push("renyi", with({DivergenceKind::renyi, 0.5, 1.0}));
            break;
        }
    }
    return runs;
}

std::filesystem::path run_ablation(const ExperimentConfig& base, AblationAxis axis,
                                   std::ostream& log) {
    const char* axis_name = axis == AblationAxis::reward     ? "reward"
                            : axis == AblationAxis::algorithm ? "algorithm"
                                                              : "divergence";
    const fs::path grid_dir =
        fs::path(base.output_dir) / (std::string("ablate-") + axis_name + "-" + hex64(config_hash(base)));
    fs::create_directories(grid_dir);

    // All variants share the same teacher; train it once at the grid level
    // and seed each run's cache with the (bit-exact) checkpoint.
    ExperimentConfig warm = base;
    warm.output_dir = grid_dir.string();
    fs::path grid_teacher;
    load_or_train_teacher(warm, warm.schedule.build(), &grid_teacher);

    std::string summary = "name,fid,precision,recall,density,coverage,covered_modes\n";
    for (AblationRun& run : ablation_grid(base, axis)) {
        run.config.output_dir = (grid_dir / run.name).string();
        fs::create_directories(fs::path(run.config.output_dir) / "teachers");
        const fs::path dest = fs::path(run.config.output_dir) / "teachers" / grid_teacher.filename();
        if (!fs::exists(dest)) fs::copy_file(grid_teacher, dest);
        log << "[ablate] " << axis_name << " = " << run.name << "\n" << std::flush;
        const RunArtifacts artifacts = run_distill_experiment(run.config);
        const MetricBlock& m = artifacts.final_metrics;
        summary += run.name + "," + format_metric(m.fid) + "," + format_metric(m.prdc.precision) +
                   "," + format_metric(m.prdc.recall) + "," + format_metric(m.prdc.density) + "," +
                   format_metric(m.prdc.coverage) + "," + std::to_string(m.covered_modes) + "\n";
    }
    write_file(grid_dir / "summary.csv", summary);
    log << "[ablate] summary: " << (grid_dir / "summary.csv").string() << "\n";
    return grid_dir;
}

std::pair<double, double> run_compare(const ExperimentConfig& config, std::ostream& os) {
    ExperimentConfig cfg = config;
    cfg.baseline = BaselineKind::truncated_teacher;

    const NoiseSchedule schedule = cfg.schedule.build();
    const CoarseSchedule coarse = build_coarse_schedule(schedule.steps, cfg.coarse.steps, cfg.coarse.strategy);
    const Denoiser teacher = load_or_train_teacher(cfg, schedule);

    const std::vector<Vec> real = draw_real_set(cfg.data, cfg.eval.n_samples, cfg.seed);
    std::vector<Trajectory> teacher_trajs =
        sample_reverse(teacher, schedule, cfg.eval.n_samples, false, mix_seed(cfg.seed, 0x7eac));
    std::vector<Vec> teacher_finals;
    teacher_finals.reserve(teacher_trajs.size());
    for (auto& t : teacher_trajs) teacher_finals.push_back(t.final_state());
    const MetricBlock teacher_metrics = evaluate_samples(real, teacher_finals, cfg.data, cfg.eval);

    const RunArtifacts artifacts = run_distill_experiment(cfg);
    const MetricBlock& student = artifacts.final_metrics;
    const MetricBlock& baseline = *artifacts.baseline_metrics;

    auto row = [&](const std::string& name, const MetricBlock& m, int steps) {
        os << std::left << std::setw(26) << name << " steps=" << std::setw(4) << steps
           << " fid=" << format_metric(m.fid) << " P=" << format_metric(m.prdc.precision)
           << " R=" << format_metric(m.prdc.recall) << " D=" << format_metric(m.prdc.density)
           << " C=" << format_metric(m.prdc.coverage) << " modes=" << m.covered_modes << "\n";
    };
    os << "comparison on " << cfg.eval.n_samples << " samples (lower fid is better)\n";
    row("teacher", teacher_metrics, schedule.steps);
    row("truncated baseline", baseline, coarse.steps);
    row("distilled student", student, coarse.steps);
    return {student.fid, baseline.fid};
}

}  // namespace diffrl
