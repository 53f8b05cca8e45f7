// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include "diffrl/data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace diffrl {

DataSpec DataSpec::gmm_ring(int modes, double radius, double mode_std, int dim) {
    if (modes < 1) throw std::invalid_argument("gmm_ring: need at least one mode");
    if (dim < 2) throw std::invalid_argument("gmm_ring: dim must be >= 2");
    if (!(mode_std > 0.0)) throw std::invalid_argument("gmm_ring: mode_std must be positive");
    DataSpec d;
    d.kind = DataKind::gmm_ring;
    d.dim = dim;
    d.mode_count = modes;
    d.mode_std = mode_std;
    d.radius = radius;
    d.mode_means.resize(static_cast<size_t>(modes), Vec(static_cast<size_t>(dim), 0.0));
    for (int m = 0; m < modes; ++m) {
        const double angle = 2.0 * M_PI * m / modes;
        d.mode_means[static_cast<size_t>(m)][0] = radius * std::cos(angle);
        d.mode_means[static_cast<size_t>(m)][1] = radius * std::sin(angle);
    }
    d.weights.assign(static_cast<size_t>(modes), 1.0 / modes);
    d.validate();
    return d;
}

DataSpec DataSpec::checkerboard() {
    DataSpec d;
    d.kind = DataKind::checkerboard;
    d.dim = 2;
    d.mode_count = 8;
    d.mode_std = 0.5;
    d.radius = 2.0;
    // Covered squares of a 4x4 board on [-2,2]^2: (i+j) even.
    for (int i = -2; i < 2; ++i) {
        for (int j = -2; j < 2; ++j) {
            if (((i + j) % 2 + 2) % 2 == 0) {
                d.mode_means.push_back({i + 0.5, j + 0.5});
            }
        }
    }
    d.weights.assign(d.mode_means.size(), 1.0 / static_cast<double>(d.mode_means.size()));
    d.validate();
    return d;
}

void DataSpec::validate() const {
    if (mode_means.size() != static_cast<size_t>(mode_count) ||
        weights.size() != static_cast<size_t>(mode_count)) {
        throw std::invalid_argument("DataSpec: mode arrays inconsistent with mode_count");
    }
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    if (std::abs(wsum - 1.0) > 1e-9) {
        throw std::invalid_argument("DataSpec: mixture weights must sum to 1");
    }
    for (size_t a = 0; a < mode_means.size(); ++a) {
        if (mode_means[a].size() != static_cast<size_t>(dim)) {
            throw std::invalid_argument("DataSpec: mode mean dim mismatch");
        }
        for (size_t b = a + 1; b < mode_means.size(); ++b) {
            if (squared_distance(mode_means[a], mode_means[b]) < 1e-12) {
                throw std::invalid_argument("DataSpec: mode means must be pairwise distinct");
            }
        }
    }
}

Vec DataSpec::sample(Rng& rng) const {
    double u = rng.uniform();
    int mode = mode_count - 1;
    double acc = 0.0;
    for (int m = 0; m < mode_count; ++m) {
        acc += weights[static_cast<size_t>(m)];
        if (u < acc) {
            mode = m;
            break;
        }
    }
    return sample_mode(mode, rng);
}

Vec DataSpec::sample_mode(int mode, Rng& rng) const {
    if (mode < 0 || mode >= mode_count) {
        throw std::invalid_argument("mode id " + std::to_string(mode) + " out of range");
    }
    const Vec& mu = mode_means[static_cast<size_t>(mode)];
    Vec x(static_cast<size_t>(dim));
    if (kind == DataKind::gmm_ring) {
        for (int i = 0; i < dim; ++i) x[static_cast<size_t>(i)] = mu[static_cast<size_t>(i)] + mode_std * rng.normal();
    } else {
        // Uniform in the unit square around the center.
        for (int i = 0; i < dim; ++i) x[static_cast<size_t>(i)] = mu[static_cast<size_t>(i)] + (rng.uniform() - 0.5);
    }
    return x;
}

double DataSpec::log_density(const Vec& x) const {
    if (x.size() != static_cast<size_t>(dim)) throw std::invalid_argument("log_density: dim mismatch");
    if (kind == DataKind::gmm_ring) {
        const double var = mode_std * mode_std;
        const double log_norm = -0.5 * dim * std::log(2.0 * M_PI * var);
        double max_term = -std::numeric_limits<double>::infinity();
        std::vector<double> terms(mode_means.size());
        for (size_t m = 0; m < mode_means.size(); ++m) {
            terms[m] = std::log(weights[m]) + log_norm - 0.5 * squared_distance(x, mode_means[m]) / var;
            max_term = std::max(max_term, terms[m]);
        }
        double s = 0.0;
        for (double t : terms) s += std::exp(t - max_term);
        return max_term + std::log(s);
    }
    // Checkerboard: uniform on covered squares, smooth quadratic falloff off
    // the support so the density stays finite and monotone outward.
    double d2_min = std::numeric_limits<double>::infinity();
    for (const Vec& mu : mode_means) {
        double d2 = 0.0;
        for (int i = 0; i < dim; ++i) {
            const double off = std::max(std::abs(x[static_cast<size_t>(i)] - mu[static_cast<size_t>(i)]) - 0.5, 0.0);
            d2 += off * off;
        }
        d2_min = std::min(d2_min, d2);
    }
    const double on_support = std::log(1.0 / static_cast<double>(mode_count));
    return on_support - d2_min / (2.0 * mode_std * mode_std);
}

int DataSpec::nearest_mode(const Vec& x) const {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int m = 0; m < mode_count; ++m) {
        const double d = squared_distance(x, mode_means[static_cast<size_t>(m)]);
        if (d < best_d) {
            best_d = d;
            best = m;
        }
    }
    return best;
}

Vec DataSpec::mode_centroid() const {
    Vec c(static_cast<size_t>(dim), 0.0);
    for (const Vec& mu : mode_means) {
        for (int i = 0; i < dim; ++i) c[static_cast<size_t>(i)] += mu[static_cast<size_t>(i)];
    }
    for (double& v : c) v /= static_cast<double>(mode_count);
    return c;
}

}  // namespace diffrl
