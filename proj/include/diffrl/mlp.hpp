// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "diffrl/common.hpp"
#include "diffrl/rng.hpp"

namespace diffrl {

enum class Activation { tanh_act, smooth_relu };

// Fully connected network with a fixed layer layout and hand-derived
// reverse-mode differentiation. Hidden layers apply the activation; the
// output layer is linear. Parameters are stored flat, per layer as the
// row-major weight matrix followed by the bias vector, which is also the
// checkpoint wire layout.
class Mlp {
public:
    Mlp(std::vector<int> widths, Activation activation);

    int input_dim() const { return widths_.front(); }
    int output_dim() const { return widths_.back(); }
    int param_count() const { return static_cast<int>(params_.size()); }
    const std::vector<int>& widths() const { return widths_; }
    Activation activation() const { return activation_; }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    void forward(std::span<const double> input, std::span<double> output) const;

    // Forward pass that records per-layer outputs for backward().
    struct Tape {
        std::vector<Vec> layer_outputs;  // [0] = input copy, last = network output
    };
    void forward(std::span<const double> input, std::span<double> output, Tape& tape) const;

    // Accumulates dLoss/dparams into param_grad given dLoss/doutput.
    // The tape must come from a forward() call with the current parameters.
    void backward(const Tape& tape, std::span<const double> output_grad,
                  std::span<double> param_grad) const;

    // dLoss/dinput only (no parameter gradients); used for input Jacobians.
    void backward_input(const Tape& tape, std::span<const double> output_grad,
                        std::span<double> input_grad) const;

    // Gaussian fan-in scaled init, biases zero.
    void init_random(Rng& rng);
    void zero_output_layer();

private:
    std::vector<int> widths_;
    Activation activation_;
    std::vector<double> params_;
    std::vector<int> layer_offsets_;  // offset of each layer's weight block

    double act(double z) const;
    double act_grad_from_output(double a) const;
};

// Adam with bias correction; decay rates 0.9/0.999, epsilon 1e-8 by default.
class AdamOptimizer {
public:
    AdamOptimizer(int param_count, double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double epsilon = 1e-8);

    void step(std::span<double> params, std::span<const double> grads);
    void set_lr(double lr) { lr_ = lr; }

private:
    double lr_, beta1_, beta2_, epsilon_;
    long t_ = 0;
    std::vector<double> m_, v_;
};

}  // namespace diffrl
