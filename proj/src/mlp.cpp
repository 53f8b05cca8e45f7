// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include "diffrl/mlp.hpp"

#include <cmath>

namespace diffrl {

Mlp::Mlp(std::vector<int> widths, Activation activation)
    : widths_(std::move(widths)), activation_(activation) {
    if (widths_.size() < 2) throw std::invalid_argument("Mlp needs at least input and output widths");
    for (int w : widths_) {
        if (w < 1) throw std::invalid_argument("Mlp widths must be positive");
    }
    int offset = 0;
    for (size_t l = 0; l + 1 < widths_.size(); ++l) {
        layer_offsets_.push_back(offset);
        offset += widths_[l] * widths_[l + 1] + widths_[l + 1];
    }
    params_.assign(static_cast<size_t>(offset), 0.0);
}

double Mlp::act(double z) const {
    if (activation_ == Activation::tanh_act) return std::tanh(z);
    // smooth_relu: softplus, numerically stable for large |z|.
    if (z > 30.0) return z;
    if (z < -30.0) return std::exp(z);
    return std::log1p(std::exp(z));
}

double Mlp::act_grad_from_output(double a) const {
    if (activation_ == Activation::tanh_act) return 1.0 - a * a;
    // softplus output a -> sigmoid(z) = 1 - exp(-a)
    return 1.0 - std::exp(-a);
}

void Mlp::forward(std::span<const double> input, std::span<double> output) const {
    Tape tape;
    forward(input, output, tape);
}

void Mlp::forward(std::span<const double> input, std::span<double> output, Tape& tape) const {
    if (static_cast<int>(input.size()) != input_dim()) throw std::invalid_argument("Mlp input dim mismatch");
    if (static_cast<int>(output.size()) != output_dim()) throw std::invalid_argument("Mlp output dim mismatch");

    const size_t layers = widths_.size() - 1;
    tape.layer_outputs.resize(layers + 1);
    tape.layer_outputs[0].assign(input.begin(), input.end());

    for (size_t l = 0; l < layers; ++l) {
        const int in_w = widths_[l];
        const int out_w = widths_[l + 1];
        const double* w = params_.data() + layer_offsets_[l];
        const double* b = w + in_w * out_w;
        const Vec& a_in = tape.layer_outputs[l];
        Vec& a_out = tape.layer_outputs[l + 1];
        a_out.resize(static_cast<size_t>(out_w));
        const bool last = (l + 1 == layers);
        for (int o = 0; o < out_w; ++o) {
            const double* row = w + static_cast<size_t>(o) * in_w;
            double z = b[o];
            for (int i = 0; i < in_w; ++i) z += row[i] * a_in[static_cast<size_t>(i)];
            a_out[static_cast<size_t>(o)] = last ? z : act(z);
        }
    }
    const Vec& final_out = tape.layer_outputs[layers];
    for (int o = 0; o < output_dim(); ++o) output[static_cast<size_t>(o)] = final_out[static_cast<size_t>(o)];
}

void Mlp::backward(const Tape& tape, std::span<const double> output_grad,
                   std::span<double> param_grad) const {
    if (static_cast<int>(output_grad.size()) != output_dim()) {
        throw std::invalid_argument("Mlp output grad dim mismatch");
    }
    if (param_grad.size() != params_.size()) throw std::invalid_argument("Mlp param grad size mismatch");

    const size_t layers = widths_.size() - 1;
    Vec delta(output_grad.begin(), output_grad.end());  // dLoss/dz of the final (linear) layer
    Vec prev;
    for (size_t li = layers; li-- > 0;) {
        const int in_w = widths_[li];
        const int out_w = widths_[li + 1];
        const double* w = params_.data() + layer_offsets_[li];
        double* gw = param_grad.data() + layer_offsets_[li];
        double* gb = gw + in_w * out_w;
        const Vec& a_in = tape.layer_outputs[li];

        for (int o = 0; o < out_w; ++o) {
            const double d = delta[static_cast<size_t>(o)];
            double* grow = gw + static_cast<size_t>(o) * in_w;
            for (int i = 0; i < in_w; ++i) grow[i] += d * a_in[static_cast<size_t>(i)];
            gb[o] += d;
        }
        if (li == 0) break;

        prev.assign(static_cast<size_t>(in_w), 0.0);
        for (int o = 0; o < out_w; ++o) {
            const double d = delta[static_cast<size_t>(o)];
            const double* row = w + static_cast<size_t>(o) * in_w;
            for (int i = 0; i < in_w; ++i) prev[static_cast<size_t>(i)] += d * row[i];
        }
        // a_in is post-activation output of layer li-1 (a hidden layer).
        for (int i = 0; i < in_w; ++i) prev[static_cast<size_t>(i)] *= act_grad_from_output(a_in[static_cast<size_t>(i)]);
        delta.swap(prev);
    }
}

void Mlp::backward_input(const Tape& tape, std::span<const double> output_grad,
                         std::span<double> input_grad) const {
    if (static_cast<int>(output_grad.size()) != output_dim() ||
        static_cast<int>(input_grad.size()) != input_dim()) {
        throw std::invalid_argument("Mlp backward_input dim mismatch");
    }
    const size_t layers = widths_.size() - 1;
    Vec delta(output_grad.begin(), output_grad.end());
    Vec prev;
    for (size_t li = layers; li-- > 0;) {
        const int in_w = widths_[li];
        const int out_w = widths_[li + 1];
        const double* w = params_.data() + layer_offsets_[li];
        const Vec& a_in = tape.layer_outputs[li];

        prev.assign(static_cast<size_t>(in_w), 0.0);
        for (int o = 0; o < out_w; ++o) {
            const double d = delta[static_cast<size_t>(o)];
            const double* row = w + static_cast<size_t>(o) * in_w;
            for (int i = 0; i < in_w; ++i) prev[static_cast<size_t>(i)] += d * row[i];
        }
        if (li > 0) {
            for (int i = 0; i < in_w; ++i) {
                prev[static_cast<size_t>(i)] *= act_grad_from_output(a_in[static_cast<size_t>(i)]);
            }
        }
        delta.swap(prev);
    }
    std::copy(delta.begin(), delta.end(), input_grad.begin());
}

void Mlp::init_random(Rng& rng) {
    const size_t layers = widths_.size() - 1;
    for (size_t l = 0; l < layers; ++l) {
        const int in_w = widths_[l];
        const int out_w = widths_[l + 1];
        double* w = params_.data() + layer_offsets_[l];
        const double scale = 1.0 / std::sqrt(static_cast<double>(in_w));
        for (int i = 0; i < in_w * out_w; ++i) w[i] = scale * rng.normal();
        double* b = w + in_w * out_w;
        for (int o = 0; o < out_w; ++o) b[o] = 0.0;
    }
}

void Mlp::zero_output_layer() {
    const size_t last = widths_.size() - 2;
    const int in_w = widths_[last];
    const int out_w = widths_[last + 1];
    double* w = params_.data() + layer_offsets_[last];
    for (int i = 0; i < in_w * out_w + out_w; ++i) w[i] = 0.0;
}

AdamOptimizer::AdamOptimizer(int param_count, double lr, double beta1, double beta2, double epsilon)
    : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon),
      m_(static_cast<size_t>(param_count), 0.0), v_(static_cast<size_t>(param_count), 0.0) {}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw std::invalid_argument("AdamOptimizer: size mismatch");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < m_.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
        params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + epsilon_);
    }
}

}  // namespace diffrl
