// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include "diffrl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace diffrl {

namespace {

constexpr char kMagic[8] = {'D', 'F', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void write_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t read_u32(std::istream& is) {
    uint32_t v;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

uint64_t read_u64(std::istream& is) {
    uint64_t v;
    is.read(reinterpret_cast<char*>(&v), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

double read_f64(std::istream& is) {
    double v;
    is.read(reinterpret_cast<char*>(&v), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

struct Header {
    uint32_t kind = 0;
    Activation activation = Activation::tanh_act;
    uint32_t time_features = 0;
    uint32_t extra_dim = 0;
    std::vector<int> widths;
    NoiseSchedule schedule;
    uint64_t seed = 0;
    std::vector<double> params;
};

void write_common(std::ostream& os, uint32_t kind, const Denoiser& net,
                  const NoiseSchedule& schedule, uint64_t seed) {
    os.write(kMagic, sizeof(kMagic));
    write_u32(os, kVersion);
    write_u32(os, kind);
    write_u32(os, static_cast<uint32_t>(net.net.activation()));
    write_u32(os, static_cast<uint32_t>(net.time_features));
    write_u32(os, static_cast<uint32_t>(net.extra_dim));
    write_u32(os, static_cast<uint32_t>(net.net.widths().size()));
    for (int w : net.net.widths()) write_u32(os, static_cast<uint32_t>(w));
    write_u32(os, static_cast<uint32_t>(schedule.kind));
    write_u32(os, static_cast<uint32_t>(schedule.steps));
    write_f64(os, schedule.beta_min);
    write_f64(os, schedule.beta_max);
    write_u64(os, seed);
    write_u64(os, static_cast<uint64_t>(net.net.params().size()));
    for (double p : net.net.params()) write_f64(os, p);
}

Header read_common(std::istream& is, const std::string& path) {
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    const uint32_t version = read_u32(is);
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    Header h;
    h.kind = read_u32(is);
    h.activation = static_cast<Activation>(read_u32(is));
    h.time_features = read_u32(is);
    h.extra_dim = read_u32(is);
    const uint32_t n_widths = read_u32(is);
    if (n_widths < 2 || n_widths > 64) throw std::runtime_error("checkpoint: implausible layer count");
    h.widths.resize(n_widths);
    for (auto& w : h.widths) w = static_cast<int>(read_u32(is));
    const auto sched_kind = static_cast<ScheduleKind>(read_u32(is));
    const int steps = static_cast<int>(read_u32(is));
    const double bmin = read_f64(is);
    const double bmax = read_f64(is);
    h.schedule = build_schedule(sched_kind, steps, bmin, bmax);
    h.seed = read_u64(is);
    const uint64_t n_params = read_u64(is);
    h.params.resize(n_params);
    for (auto& p : h.params) p = read_f64(is);
    return h;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
    return os;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot read " + path);
    return is;
}

}  // namespace

void save_teacher(const std::string& path, const Denoiser& net, const NoiseSchedule& schedule,
                  uint64_t seed) {
    std::ofstream os = open_out(path);
    write_common(os, 0, net, schedule, seed);
    if (!os) throw std::runtime_error("checkpoint: write failure for " + path);
}

TeacherCheckpoint load_teacher(const std::string& path) {
    std::ifstream is = open_in(path);
    Header h = read_common(is, path);
    if (h.kind != 0) throw std::runtime_error("checkpoint: not a teacher checkpoint: " + path);

    const int data_dim = h.widths.back();
    std::vector<int> hidden(h.widths.begin() + 1, h.widths.end() - 1);
    TeacherCheckpoint ckpt{Denoiser(data_dim, static_cast<int>(h.time_features),
                                    static_cast<int>(h.extra_dim), hidden, h.activation),
                           h.schedule, h.seed};
    if (ckpt.net.net.params().size() != h.params.size()) {
        throw std::runtime_error("checkpoint: parameter count mismatch in " + path);
    }
    ckpt.net.net.params() = h.params;
    return ckpt;
}

void save_student(const std::string& path, const StudentPolicy& policy, uint64_t seed) {
    std::ofstream os = open_out(path);
    write_common(os, 1, policy.net, policy.schedule, seed);
    write_u32(os, static_cast<uint32_t>(policy.coarse.steps));
    for (int tau : policy.coarse.taus) write_u32(os, static_cast<uint32_t>(tau));
    write_u32(os, static_cast<uint32_t>(policy.coarse.strategy));
    write_u32(os, static_cast<uint32_t>(policy.cond_dim));
    for (double ls : policy.log_stds) write_f64(os, ls);
    if (!os) throw std::runtime_error("checkpoint: write failure for " + path);
}

StudentPolicy load_student(const std::string& path) {
    std::ifstream is = open_in(path);
    Header h = read_common(is, path);
    if (h.kind != 1) throw std::runtime_error("checkpoint: not a student checkpoint: " + path);

    CoarseSchedule coarse;
    coarse.steps = static_cast<int>(read_u32(is));
    coarse.taus.resize(static_cast<size_t>(coarse.steps) + 1);
    for (auto& tau : coarse.taus) tau = static_cast<int>(read_u32(is));
    coarse.strategy = static_cast<CoarseStrategy>(read_u32(is));
    const int cond_dim = static_cast<int>(read_u32(is));

    const int data_dim = h.widths.back();
    std::vector<int> hidden(h.widths.begin() + 1, h.widths.end() - 1);

    StudentPolicy policy{
        .data_dim = data_dim,
        .cond_dim = cond_dim,
        .schedule = h.schedule,
        .coarse = coarse,
        .net = Denoiser(data_dim, static_cast<int>(h.time_features), static_cast<int>(h.extra_dim),
                        hidden, h.activation),
        .log_stds = {},
        .skip_x = {},
        .skip_eps = {},
    };
    if (policy.net.net.params().size() != h.params.size()) {
        throw std::runtime_error("checkpoint: parameter count mismatch in " + path);
    }
    policy.net.net.params() = h.params;
    policy.log_stds.resize(static_cast<size_t>(coarse.steps));
    for (auto& ls : policy.log_stds) ls = read_f64(is);

    // Skip coefficients are schedule-derived; rebuild them.
    policy.skip_x.resize(static_cast<size_t>(coarse.steps));
    policy.skip_eps.resize(static_cast<size_t>(coarse.steps));
    for (int k = 0; k < coarse.steps; ++k) {
        const int hi = coarse.taus[static_cast<size_t>(k)];
        const int lo = coarse.taus[static_cast<size_t>(k) + 1];
        const IntervalCoefs c = compose_interval(policy.schedule, hi, lo);
        const double abar = policy.schedule.alpha_bar(hi);
        policy.skip_x[static_cast<size_t>(k)] = c.state_coef + c.x0_coef / std::sqrt(abar);
        policy.skip_eps[static_cast<size_t>(k)] = -c.x0_coef * std::sqrt(1.0 - abar) / std::sqrt(abar);
    }
    return policy;
}

}  // namespace diffrl
