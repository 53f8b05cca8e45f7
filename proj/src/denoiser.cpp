// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include "diffrl/denoiser.hpp"

#include <cmath>

namespace diffrl {

Vec time_embedding(int t, int feature_count) {
    if (feature_count < 2 || feature_count % 2 != 0) {
        throw std::invalid_argument("time_embedding: feature count must be even and >= 2");
    }
    const int pairs = feature_count / 2;
    Vec e(static_cast<size_t>(feature_count));
    for (int i = 0; i < pairs; ++i) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / pairs);
        e[static_cast<size_t>(2 * i)] = std::sin(freq * t);
        e[static_cast<size_t>(2 * i + 1)] = std::cos(freq * t);
    }
    return e;
}

namespace {

std::vector<int> full_widths(int data_dim, int time_features, int extra_dim,
                             const std::vector<int>& hidden) {
    std::vector<int> w;
    w.push_back(data_dim + time_features + extra_dim);
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(data_dim);
    return w;
}

}  // namespace

Denoiser::Denoiser(int data_dim, int time_features, int extra_dim, std::vector<int> hidden_widths,
                   Activation activation)
    : data_dim(data_dim),
      time_features(time_features),
      extra_dim(extra_dim),
      net(full_widths(data_dim, time_features, extra_dim, hidden_widths), activation) {}

Vec Denoiser::predict(const Vec& x, int t, std::span<const double> extra) const {
    Mlp::Tape tape;
    return predict(x, t, extra, tape);
}

Vec Denoiser::predict(const Vec& x, int t, std::span<const double> extra, Mlp::Tape& tape) const {
    if (static_cast<int>(x.size()) != data_dim) throw std::invalid_argument("Denoiser: x dim mismatch");
    if (static_cast<int>(extra.size()) != extra_dim) throw std::invalid_argument("Denoiser: extra dim mismatch");
    Vec input;
    input.reserve(static_cast<size_t>(net.input_dim()));
    input.insert(input.end(), x.begin(), x.end());
    const Vec te = time_embedding(t, time_features);
    input.insert(input.end(), te.begin(), te.end());
    input.insert(input.end(), extra.begin(), extra.end());
    Vec out(static_cast<size_t>(data_dim));
    net.forward(input, out, tape);
    return out;
}

std::vector<double> Denoiser::jacobian_x(const Vec& x, int t, std::span<const double> extra) const {
    Mlp::Tape tape;
    predict(x, t, extra, tape);
    std::vector<double> jac(static_cast<size_t>(data_dim) * data_dim);
    Vec dout(static_cast<size_t>(data_dim), 0.0);
    Vec din(static_cast<size_t>(net.input_dim()));
    for (int j = 0; j < data_dim; ++j) {
        dout[static_cast<size_t>(j)] = 1.0;
        net.backward_input(tape, dout, din);
        dout[static_cast<size_t>(j)] = 0.0;
        for (int i = 0; i < data_dim; ++i) {
            jac[static_cast<size_t>(j) * data_dim + i] = din[static_cast<size_t>(i)];
        }
    }
    return jac;
}

Denoiser make_teacher_net(int data_dim, std::vector<int> hidden_widths, int time_features,
                          Activation activation, uint64_t seed) {
    Denoiser d(data_dim, time_features, 0, std::move(hidden_widths), activation);
    Rng rng(seed, 0x1e7);
    d.net.init_random(rng);
    return d;
}

}  // namespace diffrl
