// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include "diffrl/rewards.hpp"

#include <algorithm>
#include <cmath>

namespace diffrl {

Encoder::Encoder(int data_dim, uint64_t seed, int embed_dim, int hidden_dim)
    : net_({data_dim, hidden_dim, embed_dim}, Activation::tanh_act), seed_(seed) {
    Rng rng(seed, 0xfeae);
    // Moderate first-layer frequencies and random phases keep the hidden
    // units responsive (rather than saturated) over the data span, so the
    // embedding cosine decays with distance instead of hashing it.
    auto& p = net_.params();
    size_t off = 0;
    const double w1_scale = 0.35 / std::sqrt(static_cast<double>(data_dim));
    for (int i = 0; i < data_dim * hidden_dim; ++i) p[off + static_cast<size_t>(i)] = w1_scale * rng.normal();
    off += static_cast<size_t>(data_dim) * hidden_dim;
    for (int i = 0; i < hidden_dim; ++i) p[off + static_cast<size_t>(i)] = 0.5 * rng.normal();
    off += static_cast<size_t>(hidden_dim);
    const double w2_scale = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    for (int i = 0; i < hidden_dim * embed_dim; ++i) p[off + static_cast<size_t>(i)] = w2_scale * rng.normal();
    off += static_cast<size_t>(hidden_dim) * embed_dim;
    for (int i = 0; i < embed_dim; ++i) p[off + static_cast<size_t>(i)] = 0.1 * rng.normal();
}

Vec Encoder::raw_embed(const Vec& x) const {
    if (static_cast<int>(x.size()) != net_.input_dim()) {
        throw std::invalid_argument("Encoder: input dim mismatch");
    }
    Vec out(static_cast<size_t>(net_.output_dim()));
    net_.forward(x, out);
    return out;
}

Vec Encoder::embed(const Vec& x) const {
    Vec out = raw_embed(x);
    const double n = std::max(norm(out), 1e-300);
    for (double& v : out) v /= n;
    return out;
}

double Encoder::frobenius_bound() const {
    const auto& w = net_.widths();
    const auto& p = net_.params();
    double bound = 1.0;
    size_t off = 0;
    for (size_t l = 0; l + 1 < w.size(); ++l) {
        double ss = 0.0;
        const size_t n_weights = static_cast<size_t>(w[l]) * w[l + 1];
        for (size_t i = 0; i < n_weights; ++i) ss += p[off + i] * p[off + i];
        bound *= std::sqrt(ss);
        off += n_weights + static_cast<size_t>(w[l + 1]);
    }
    return bound;
}

const char* reward_kind_name(RewardKind kind) {
    switch (kind) {
        case RewardKind::teacher_cosine: return "teacher_cosine";
        case RewardKind::mmd: return "mmd";
        case RewardKind::align: return "align";
        case RewardKind::energy: return "energy";
    }
    return "?";
}

RewardKind reward_kind_from_name(const std::string& name) {
    if (name == "teacher_cosine") return RewardKind::teacher_cosine;
    if (name == "mmd") return RewardKind::mmd;
    if (name == "align") return RewardKind::align;
    if (name == "energy") return RewardKind::energy;
    throw std::invalid_argument("unknown reward kind: " + name);
}

void RewardSpec::validate() const {
    if (components.empty()) throw std::invalid_argument("RewardSpec: at least one component required");
    for (const auto& c : components) {
        if (!std::isfinite(c.weight)) throw std::invalid_argument("RewardSpec: non-finite weight");
    }
}

double cosine_reward(const Encoder& enc, const Vec& x_student, const Vec& x_teacher) {
    const double c = dot(enc.embed(x_student), enc.embed(x_teacher));
    return std::clamp(c, -1.0, 1.0);
}

double mmd2_unbiased(const std::vector<Vec>& a, const std::vector<Vec>& b, double bandwidth) {
    if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("mmd: batch sizes must be >= 2");
    if (!(bandwidth > 0.0)) throw std::invalid_argument("mmd: bandwidth must be positive");
    const double gamma = 1.0 / (2.0 * bandwidth * bandwidth);
    auto kernel = [&](const Vec& x, const Vec& y) { return std::exp(-gamma * squared_distance(x, y)); };

    const double m = static_cast<double>(a.size());
    const double n = static_cast<double>(b.size());
    double kaa = 0.0, kbb = 0.0, kab = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        for (size_t j = 0; j < a.size(); ++j) {
            if (i != j) kaa += kernel(a[i], a[j]);
        }
    }
    for (size_t i = 0; i < b.size(); ++i) {
        for (size_t j = 0; j < b.size(); ++j) {
            if (i != j) kbb += kernel(b[i], b[j]);
        }
    }
    for (const auto& x : a) {
        for (const auto& y : b) kab += kernel(x, y);
    }
    return kaa / (m * (m - 1.0)) + kbb / (n * (n - 1.0)) - 2.0 * kab / (m * n);
}

double mmd_reward(const Encoder& enc, const std::vector<Vec>& student_batch,
                  const std::vector<Vec>& teacher_batch, double bandwidth) {
    std::vector<Vec> ea, eb;
    ea.reserve(student_batch.size());
    eb.reserve(teacher_batch.size());
    for (const auto& x : student_batch) ea.push_back(enc.embed(x));
    for (const auto& x : teacher_batch) eb.push_back(enc.embed(x));
    return -mmd2_unbiased(ea, eb, bandwidth);
}

double align_reward(const Vec& x, int condition, const DataSpec& data) {
    if (condition < 0 || condition >= data.mode_count) {
        throw std::invalid_argument("align_reward: invalid mode id " + std::to_string(condition));
    }
    const double scale = 2.0 * data.mode_std * data.mode_std;
    double max_term = -1e300;
    std::vector<double> terms(static_cast<size_t>(data.mode_count));
    for (int m = 0; m < data.mode_count; ++m) {
        terms[static_cast<size_t>(m)] = -squared_distance(x, data.mode_means[static_cast<size_t>(m)]) / scale;
        max_term = std::max(max_term, terms[static_cast<size_t>(m)]);
    }
    double denom = 0.0;
    for (double t : terms) denom += std::exp(t - max_term);
    return std::exp(terms[static_cast<size_t>(condition)] - max_term) / denom;
}

double energy_reward(const Vec& x, const DataSpec& data) {
    if (data.kind != DataKind::gmm_ring) {
        throw std::invalid_argument("energy_reward is defined for the Gaussian-mixture dataset");
    }
    const double hi = data.log_density(data.mode_means.front());
    const double lo = data.log_density(data.mode_centroid());
    return (data.log_density(x) - lo) / (hi - lo);
}

void RunningZScore::absorb(size_t component, std::span<const double> values) {
    Welford& w = stats_.at(component);
    for (double x : values) {
        ++w.count;
        const double d = x - w.mean;
        w.mean += d / static_cast<double>(w.count);
        w.m2 += d * (x - w.mean);
    }
}

double RunningZScore::standardize(size_t component, double value) const {
    const Welford& w = stats_.at(component);
    if (w.count == 0) return value;
    const double var = w.count > 1 ? w.m2 / static_cast<double>(w.count) : 0.0;
    const double sd = std::max(std::sqrt(std::max(var, 0.0)), 1e-6);
    return (value - w.mean) / sd;
}

RewardBatch combine(const RewardSpec& spec, const std::vector<std::vector<double>>& component_values,
                    RunningZScore* state) {
    spec.validate();
    if (component_values.size() != spec.components.size()) {
        throw std::invalid_argument("combine: component count mismatch");
    }
    const size_t n = component_values.empty() ? 0 : component_values.front().size();
    for (const auto& vals : component_values) {
        if (vals.size() != n) throw std::invalid_argument("combine: ragged component values");
    }
    if (spec.normalize == RewardNormalize::running_zscore) {
        if (!state || state->components() != spec.components.size()) {
            throw std::invalid_argument("combine: z-score state missing or mis-sized");
        }
        for (size_t c = 0; c < component_values.size(); ++c) state->absorb(c, component_values[c]);
    }

    RewardBatch batch;
    batch.raw = component_values;
    batch.total.assign(n, 0.0);
    for (size_t c = 0; c < component_values.size(); ++c) {
        const double w = spec.components[c].weight;
        for (size_t i = 0; i < n; ++i) {
            double v = component_values[c][i];
            if (spec.normalize == RewardNormalize::running_zscore) v = state->standardize(c, v);
            batch.total[i] += w * v;
        }
    }
    for (double v : batch.total) {
        if (!std::isfinite(v)) throw std::runtime_error("combine: non-finite reward");
    }
    return batch;
}

Rewarder::Rewarder(RewardSpec spec, DataSpec data, const Denoiser* teacher,
                   const NoiseSchedule* schedule, double mmd_bandwidth)
    : spec_(std::move(spec)),
      data_(std::move(data)),
      teacher_(teacher),
      schedule_(schedule),
      mmd_bandwidth_(mmd_bandwidth),
      zscore_(spec_.components.size()) {
    spec_.validate();
}

bool Rewarder::needs_teacher_pairs() const {
    for (const auto& c : spec_.components) {
        if (c.kind == RewardKind::teacher_cosine || c.kind == RewardKind::mmd) return true;
    }
    return false;
}

const Encoder& Rewarder::encoder(uint64_t seed) {
    auto it = encoders_.find(seed);
    if (it == encoders_.end()) {
        it = encoders_.emplace(seed, Encoder(data_.dim, seed)).first;
    }
    return it->second;
}

RewardBatch Rewarder::score(const std::vector<Trajectory>& trajectories,
                            const std::vector<Vec>& teacher_finals, int group_size) {
    const size_t n = trajectories.size();
    if (needs_teacher_pairs() && teacher_finals.size() != n) {
        throw std::invalid_argument("Rewarder: teacher pairing required but finals missing");
    }
    if (group_size < 1 || n % static_cast<size_t>(group_size) != 0) {
        throw std::invalid_argument("Rewarder: batch not divisible into groups");
    }

    std::vector<std::vector<double>> values(spec_.components.size(), std::vector<double>(n, 0.0));
    for (size_t c = 0; c < spec_.components.size(); ++c) {
        const RewardComponent& comp = spec_.components[c];
        switch (comp.kind) {
            case RewardKind::teacher_cosine: {
                const Encoder& enc = encoder(comp.encoder_seed);
                for (size_t i = 0; i < n; ++i) {
                    values[c][i] = cosine_reward(enc, trajectories[i].final_state(), teacher_finals[i]);
                }
                break;
            }
            case RewardKind::mmd: {
                // Scored per group so the distributional signal varies within
                // a batch; with G = 1 the whole batch forms one group.
                const Encoder& enc = encoder(comp.encoder_seed);
                const size_t g = group_size >= 2 ? static_cast<size_t>(group_size) : n;
                for (size_t start = 0; start < n; start += g) {
                    std::vector<Vec> sb, tb;
                    for (size_t i = start; i < start + g; ++i) {
                        sb.push_back(trajectories[i].final_state());
                        tb.push_back(teacher_finals[i]);
                    }
                    const double r = mmd_reward(enc, sb, tb, mmd_bandwidth_);
                    for (size_t i = start; i < start + g; ++i) values[c][i] = r;
                }
                break;
            }
            case RewardKind::align: {
                for (size_t i = 0; i < n; ++i) {
                    if (!trajectories[i].condition) {
                        throw std::invalid_argument("align reward needs a conditioned trajectory " +
                                                    std::to_string(i));
                    }
                    values[c][i] = align_reward(trajectories[i].final_state(), *trajectories[i].condition, data_);
                }
                break;
            }
            case RewardKind::energy: {
                for (size_t i = 0; i < n; ++i) {
                    values[c][i] = energy_reward(trajectories[i].final_state(), data_);
                }
                break;
            }
        }
        if (!all_finite(values[c])) {
            throw std::runtime_error(std::string("Rewarder: non-finite ") +
                                     reward_kind_name(comp.kind) + " component");
        }
    }

    RewardBatch batch = combine(spec_, values,
                                spec_.normalize == RewardNormalize::running_zscore ? &zscore_ : nullptr);
    if (per_step_hook) {
        for (size_t i = 0; i < n; ++i) batch.total[i] += per_step_hook(trajectories[i]);
    }
    return batch;
}

}  // namespace diffrl
