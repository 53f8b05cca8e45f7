// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include "diffrl/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "diffrl/rng.hpp"

namespace diffrl {

namespace {

// Distance from every point of `from` to every point of `to`.
std::vector<std::vector<double>> pairwise_distances(const std::vector<Vec>& from,
                                                    const std::vector<Vec>& to) {
    std::vector<std::vector<double>> d(from.size(), std::vector<double>(to.size()));
    for (size_t i = 0; i < from.size(); ++i) {
        for (size_t j = 0; j < to.size(); ++j) {
            d[i][j] = std::sqrt(squared_distance(from[i], to[j]));
        }
    }
    return d;
}

// Radius of each point's k-NN ball within its own set (self excluded).
std::vector<double> knn_radii(const std::vector<Vec>& set, int k) {
    const size_t n = set.size();
    std::vector<double> radii(n);
    std::vector<double> row(n - 1);
    for (size_t i = 0; i < n; ++i) {
        size_t m = 0;
        for (size_t j = 0; j < n; ++j) {
            if (j != i) row[m++] = std::sqrt(squared_distance(set[i], set[j]));
        }
        std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
        radii[i] = row[static_cast<size_t>(k - 1)];
    }
    return radii;
}

}  // namespace

PRDCResult prdc(const std::vector<Vec>& real, const std::vector<Vec>& fake, int k) {
    if (k < 1) throw std::invalid_argument("prdc: k must be >= 1");
    if (real.size() < static_cast<size_t>(k) + 1 || fake.size() < static_cast<size_t>(k) + 1) {
        throw std::invalid_argument("prdc: both sets need at least k+1 points");
    }
    const std::vector<double> real_radii = knn_radii(real, k);
    const std::vector<double> fake_radii = knn_radii(fake, k);
    const auto d_fr = pairwise_distances(fake, real);

    PRDCResult r;
    // precision: fake points inside any real ball; density: mean cover count / k.
    size_t covered_fake = 0;
    double cover_count = 0.0;
    for (size_t f = 0; f < fake.size(); ++f) {
        size_t c = 0;
        for (size_t i = 0; i < real.size(); ++i) {
            if (d_fr[f][i] <= real_radii[i]) ++c;
        }
        if (c > 0) ++covered_fake;
        cover_count += static_cast<double>(c);
    }
    r.precision = static_cast<double>(covered_fake) / static_cast<double>(fake.size());
    r.density = cover_count / (static_cast<double>(k) * static_cast<double>(fake.size()));

    // recall: real points inside any fake ball.
    size_t covered_real = 0;
    for (size_t i = 0; i < real.size(); ++i) {
        for (size_t f = 0; f < fake.size(); ++f) {
            if (d_fr[f][i] <= fake_radii[f]) {
                ++covered_real;
                break;
            }
        }
    }
    r.recall = static_cast<double>(covered_real) / static_cast<double>(real.size());

    // coverage: real balls containing at least one fake point.
    size_t hit_real = 0;
    for (size_t i = 0; i < real.size(); ++i) {
        for (size_t f = 0; f < fake.size(); ++f) {
            if (d_fr[f][i] <= real_radii[i]) {
                ++hit_real;
                break;
            }
        }
    }
    r.coverage = static_cast<double>(hit_real) / static_cast<double>(real.size());
    return r;
}

double frechet_distance(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("frechet_distance: empty sample set");
    const int dim = static_cast<int>(a.front().size());
    if (a.size() < static_cast<size_t>(dim) + 1 || b.size() < static_cast<size_t>(dim) + 1) {
        throw std::invalid_argument("frechet_distance: need at least dim+1 points per set");
    }

    auto fit = [dim](const std::vector<Vec>& xs, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
        const double n = static_cast<double>(xs.size());
        mu = Eigen::VectorXd::Zero(dim);
        for (const Vec& x : xs) {
            for (int i = 0; i < dim; ++i) mu[i] += x[static_cast<size_t>(i)];
        }
        mu /= n;
        cov = Eigen::MatrixXd::Zero(dim, dim);
        for (const Vec& x : xs) {
            Eigen::VectorXd c(dim);
            for (int i = 0; i < dim; ++i) c[i] = x[static_cast<size_t>(i)] - mu[i];
            cov += c * c.transpose();
        }
        cov /= (n - 1.0);
    };

    Eigen::VectorXd mu1, mu2;
    Eigen::MatrixXd s1, s2;
    fit(a, mu1, s1);
    fit(b, mu2, s2);
    if (!s1.allFinite() || !s2.allFinite()) throw std::runtime_error("frechet_distance: covariance not finite");

    auto psd_sqrt = [](const Eigen::MatrixXd& m) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
        Eigen::VectorXd ev = es.eigenvalues();
        for (int i = 0; i < ev.size(); ++i) ev[i] = std::sqrt(std::max(ev[i], 0.0));
        return Eigen::MatrixXd(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
    };

    // tr((S1 S2)^{1/2}) computed through the symmetric product
    // S1^{1/2} S2 S1^{1/2}; eigenvalues below the -1e-8 tolerance are noise
    // from near-singular fits and are clipped at zero.
    const Eigen::MatrixXd rs1 = psd_sqrt(s1);
    Eigen::MatrixXd m = rs1 * s2 * rs1;
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    double tr_sqrt = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        tr_sqrt += std::sqrt(std::max(es.eigenvalues()[i], 0.0));
    }

    const double mean_term = (mu1 - mu2).squaredNorm();
    return mean_term + s1.trace() + s2.trace() - 2.0 * tr_sqrt;
}

ModeMetrics mode_metrics(const std::vector<Vec>& samples, const DataSpec& data, double threshold) {
    if (samples.empty()) throw std::invalid_argument("mode_metrics: no samples");
    ModeMetrics m;
    m.mass.assign(static_cast<size_t>(data.mode_count), 0.0);
    for (const Vec& x : samples) {
        m.mass[static_cast<size_t>(data.nearest_mode(x))] += 1.0;
    }
    for (double& v : m.mass) v /= static_cast<double>(samples.size());
    for (double v : m.mass) {
        if (v >= threshold) ++m.covered;
    }
    return m;
}

GradCheckResult gradcheck(const std::function<double(std::span<const double>)>& loss,
                          const std::function<void(std::span<const double>, std::span<double>)>& analytic_grad,
                          std::vector<double> params, double step, int max_coords, uint64_t seed) {
    if (!(step > 0.0)) throw std::invalid_argument("gradcheck: step must be positive");
    GradCheckResult result;
    result.cancellation_warning = (step < 1e-6 || step > 1e-3);

    const double base = loss(params);
    if (!std::isfinite(base)) throw std::runtime_error("gradcheck: loss not finite at params");

    std::vector<double> analytic(params.size(), 0.0);
    analytic_grad(params, analytic);

    std::vector<size_t> coords;
    if (params.size() <= static_cast<size_t>(max_coords)) {
        coords.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) coords[i] = i;
    } else {
        Rng rng(seed, 0x9cad);
        for (int i = 0; i < max_coords; ++i) {
            coords.push_back(static_cast<size_t>(rng.uniform_int(0, static_cast<int>(params.size()) - 1)));
        }
    }

    for (size_t c : coords) {
        const double keep = params[c];
        params[c] = keep + step;
        const double up = loss(params);
        params[c] = keep - step;
        const double down = loss(params);
        params[c] = keep;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw std::runtime_error("gradcheck: non-finite perturbation loss at coordinate " +
                                     std::to_string(c));
        }
        const double numeric = (up - down) / (2.0 * step);
        const double rel = std::abs(analytic[c] - numeric) /
                           std::max({1e-8, std::abs(analytic[c]), std::abs(numeric)});
        if (rel > result.max_rel_err) {
            result.max_rel_err = rel;
            result.argmax_index = static_cast<int>(c);
        }
    }
    return result;
}

namespace {

// Least-squares slope of the window ending at index `end` (inclusive).
double trailing_slope(std::span<const double> ys, size_t end, int window) {
    const size_t start = end + 1 - static_cast<size_t>(window);
    const double n = static_cast<double>(window);
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < window; ++i) {
        const double x = static_cast<double>(i);
        const double y = ys[start + static_cast<size_t>(i)];
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

std::optional<int> overopt_monitor(std::span<const double> reward_curve,
                                   std::span<const double> fid_curve, int window) {
    if (reward_curve.size() != fid_curve.size()) {
        throw std::invalid_argument("overopt_monitor: curve length mismatch");
    }
    if (window < 2 || reward_curve.size() < 2 * static_cast<size_t>(window)) {
        throw std::invalid_argument("overopt_monitor: curves must span at least 2*window epochs");
    }
    const size_t n = reward_curve.size();
    std::vector<bool> both_up(n, false);
    for (size_t e = static_cast<size_t>(window) - 1; e < n; ++e) {
        both_up[e] = trailing_slope(reward_curve, e, window) > 0.0 &&
                     trailing_slope(fid_curve, e, window) > 0.0;
    }
    int run = 0;
    for (size_t e = 0; e < n; ++e) {
        run = both_up[e] ? run + 1 : 0;
        if (run >= window) return static_cast<int>(e) - window + 1;
    }
    return std::nullopt;
}

}  // namespace diffrl
