// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "diffrl/mlp.hpp"

namespace diffrl {

// Sinusoidal features of an integer timestep: feature_count/2 frequency
// pairs (sin, cos) with geometrically spaced frequencies.
Vec time_embedding(int t, int feature_count);

// Noise-prediction network. The input is assembled as
//   [x, time_embedding(t), extra]
// where `extra` carries optional conditioning (student step one-hot and
// condition one-hot); the teacher uses extra_dim = 0.
struct Denoiser {
    int data_dim = 0;
    int time_features = 0;
    int extra_dim = 0;
    Mlp net;

    Denoiser(int data_dim, int time_features, int extra_dim, std::vector<int> hidden_widths,
             Activation activation);

    int param_count() const { return net.param_count(); }

    // Predicts the noise component at (x, t). `extra` must have extra_dim
    // entries (may be empty when extra_dim == 0).
    Vec predict(const Vec& x, int t, std::span<const double> extra = {}) const;
    Vec predict(const Vec& x, int t, std::span<const double> extra, Mlp::Tape& tape) const;

    // Jacobian of the prediction with respect to x, row-major data_dim^2.
    std::vector<double> jacobian_x(const Vec& x, int t, std::span<const double> extra = {}) const;
};

Denoiser make_teacher_net(int data_dim, std::vector<int> hidden_widths, int time_features,
                          Activation activation, uint64_t seed);

}  // namespace diffrl
