// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include "diffrl/kernel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace diffrl {

namespace {
constexpr double kKernelTailSigmas = 8.0;
constexpr double kSourceMassFloor = 1e-16;
constexpr double kLeakTolerance = 1e-3;
}  // namespace

double GridSpec::cell_size(int d) const {
    return (hi[static_cast<size_t>(d)] - lo[static_cast<size_t>(d)]) / resolution[static_cast<size_t>(d)];
}

double GridSpec::cell_volume() const {
    double v = 1.0;
    for (int d = 0; d < dims(); ++d) v *= cell_size(d);
    return v;
}

size_t GridSpec::cell_count() const {
    size_t n = 1;
    for (int r : resolution) n *= static_cast<size_t>(r);
    return n;
}

double GridSpec::coord(int d, int index) const {
    return lo[static_cast<size_t>(d)] + (index + 0.5) * cell_size(d);
}

void GridSpec::validate() const {
    if (dims() < 1 || dims() > 2) throw std::invalid_argument("GridSpec: 1D or 2D only");
    if (lo.size() != resolution.size() || hi.size() != resolution.size()) {
        throw std::invalid_argument("GridSpec: bounds/resolution mismatch");
    }
    for (int d = 0; d < dims(); ++d) {
        if (resolution[static_cast<size_t>(d)] < 8) throw std::invalid_argument("GridSpec: resolution too small");
        if (!(hi[static_cast<size_t>(d)] > lo[static_cast<size_t>(d)])) {
            throw std::invalid_argument("GridSpec: empty extent");
        }
    }
}

double GridDensity::mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * grid.cell_volume();
}

namespace {

// Per-axis Gaussian factors over the window of cells within the truncation
// radius around mu; returns [first, last] cell indices.
struct AxisWindow {
    int first = 0;
    int last = -1;
    std::vector<double> pdf;
};

AxisWindow axis_window(const GridSpec& grid, int d, double mu, double stddev) {
    AxisWindow w;
    const double radius = kKernelTailSigmas * stddev;
    const double h = grid.cell_size(d);
    const int n = grid.resolution[static_cast<size_t>(d)];
    int first = static_cast<int>(std::floor((mu - radius - grid.lo[static_cast<size_t>(d)]) / h));
    int last = static_cast<int>(std::ceil((mu + radius - grid.lo[static_cast<size_t>(d)]) / h));
    const bool narrow = stddev < 3.0 * h;
    if (narrow) {
        // Keep at least the cell containing mu so near-deterministic
        // transitions (floored variances) deposit their mass.
        const int nearest = static_cast<int>(std::floor((mu - grid.lo[static_cast<size_t>(d)]) / h));
        first = std::min(first, nearest);
        last = std::max(last, nearest);
    }
    first = std::max(first, 0);
    last = std::min(last, n - 1);
    w.first = first;
    w.last = last;
    if (first > last) return w;
    w.pdf.resize(static_cast<size_t>(last - first + 1));
    if (narrow) {
        // Mass-exact per cell: difference of Gaussian CDFs across the cell
        // edges, expressed as an average density over the cell.
        auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - mu) / (stddev * std::sqrt(2.0))); };
        for (int i = first; i <= last; ++i) {
            const double left = grid.lo[static_cast<size_t>(d)] + i * h;
            w.pdf[static_cast<size_t>(i - first)] = (cdf(left + h) - cdf(left)) / h;
        }
    } else {
        const double norm = 1.0 / (stddev * std::sqrt(2.0 * M_PI));
        for (int i = first; i <= last; ++i) {
            const double z = (grid.coord(d, i) - mu) / stddev;
            w.pdf[static_cast<size_t>(i - first)] = norm * std::exp(-0.5 * z * z);
        }
    }
    return w;
}

// Deposits `weight` times the Gaussian N(mu, stddev^2 I) into the target
// density values (as density, not mass).
void deposit(const GridSpec& grid, std::vector<double>& target, const Vec& mu, double stddev,
             double weight) {
    if (grid.dims() == 1) {
        const AxisWindow w = axis_window(grid, 0, mu[0], stddev);
        for (int i = w.first; i <= w.last; ++i) {
            target[static_cast<size_t>(i)] += weight * w.pdf[static_cast<size_t>(i - w.first)];
        }
        return;
    }
    const AxisWindow w0 = axis_window(grid, 0, mu[0], stddev);
    const AxisWindow w1 = axis_window(grid, 1, mu[1], stddev);
    const int n1 = grid.resolution[1];
    for (int i = w0.first; i <= w0.last; ++i) {
        const double f0 = weight * w0.pdf[static_cast<size_t>(i - w0.first)];
        double* row = target.data() + static_cast<size_t>(i) * n1;
        for (int j = w1.first; j <= w1.last; ++j) {
            row[j] += f0 * w1.pdf[static_cast<size_t>(j - w1.first)];
        }
    }
}

// One reverse step applied to a whole grid density.
void apply_kernel_step(const Denoiser& net, const NoiseSchedule& schedule, int t,
                       GridDensity& density) {
    const GridSpec& grid = density.grid;
    const double vol = grid.cell_volume();
    const double stddev = std::sqrt(schedule.posterior_variance(t));
    std::vector<double> next(density.values.size(), 0.0);
    Vec x(static_cast<size_t>(grid.dims()));

    if (grid.dims() == 1) {
        for (int i = 0; i < grid.resolution[0]; ++i) {
            const double w = density.values[static_cast<size_t>(i)] * vol;
            if (w < kSourceMassFloor) continue;
            x[0] = grid.coord(0, i);
            deposit(grid, next, posterior_mean(net, schedule, x, t), stddev, w);
        }
    } else {
        const int n1 = grid.resolution[1];
        for (int i = 0; i < grid.resolution[0]; ++i) {
            x[0] = grid.coord(0, i);
            for (int j = 0; j < n1; ++j) {
                const double w = density.values[static_cast<size_t>(i) * n1 + j] * vol;
                if (w < kSourceMassFloor) continue;
                x[1] = grid.coord(1, j);
                deposit(grid, next, posterior_mean(net, schedule, x, t), stddev, w);
            }
        }
    }
    density.values.swap(next);
}

int count_local_maxima(const GridDensity& density) {
    const GridSpec& grid = density.grid;
    double maxval = 0.0;
    for (double v : density.values) maxval = std::max(maxval, v);
    const double floor = 1e-4 * maxval;
    int count = 0;
    if (grid.dims() == 1) {
        const int n = grid.resolution[0];
        for (int i = 0; i < n; ++i) {
            const double v = density.values[static_cast<size_t>(i)];
            if (v < floor) continue;
            const bool up = i == 0 || v > density.values[static_cast<size_t>(i - 1)];
            const bool down = i == n - 1 || v > density.values[static_cast<size_t>(i + 1)];
            if (up && down) ++count;
        }
        return count;
    }
    const int n0 = grid.resolution[0], n1 = grid.resolution[1];
    for (int i = 0; i < n0; ++i) {
        for (int j = 0; j < n1; ++j) {
            const double v = density.values[static_cast<size_t>(i) * n1 + j];
            if (v < floor) continue;
            bool is_max = true;
            for (int di = -1; di <= 1 && is_max; ++di) {
                for (int dj = -1; dj <= 1 && is_max; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    const int ii = i + di, jj = j + dj;
                    if (ii < 0 || ii >= n0 || jj < 0 || jj >= n1) continue;
                    if (density.values[static_cast<size_t>(ii) * n1 + jj] >= v) is_max = false;
                }
            }
            if (is_max) ++count;
        }
    }
    return count;
}

}  // namespace

MomentReport grid_moments(const GridDensity& density) {
    const GridSpec& grid = density.grid;
    const int dims = grid.dims();
    MomentReport report;
    report.mean.assign(static_cast<size_t>(dims), 0.0);
    report.variance.assign(static_cast<size_t>(dims), 0.0);
    report.skewness.assign(static_cast<size_t>(dims), 0.0);
    report.excess_kurtosis.assign(static_cast<size_t>(dims), 0.0);

    const double vol = grid.cell_volume();
    double total = 0.0;
    auto for_each_cell = [&](auto&& fn) {
        if (dims == 1) {
            for (int i = 0; i < grid.resolution[0]; ++i) {
                fn(density.values[static_cast<size_t>(i)] * vol, grid.coord(0, i), 0.0);
            }
        } else {
            const int n1 = grid.resolution[1];
            for (int i = 0; i < grid.resolution[0]; ++i) {
                for (int j = 0; j < n1; ++j) {
                    fn(density.values[static_cast<size_t>(i) * n1 + j] * vol, grid.coord(0, i),
                       grid.coord(1, j));
                }
            }
        }
    };

    for_each_cell([&](double w, double x0, double x1) {
        total += w;
        report.mean[0] += w * x0;
        if (dims > 1) report.mean[1] += w * x1;
    });
    if (total <= 0.0) throw std::runtime_error("grid_moments: zero mass");
    for (double& m : report.mean) m /= total;

    Vec m2(static_cast<size_t>(dims), 0.0), m3(static_cast<size_t>(dims), 0.0), m4(static_cast<size_t>(dims), 0.0);
    for_each_cell([&](double w, double x0, double x1) {
        const double c[2] = {x0 - report.mean[0], dims > 1 ? x1 - report.mean[1] : 0.0};
        for (int d = 0; d < dims; ++d) {
            const double c2 = c[d] * c[d];
            m2[static_cast<size_t>(d)] += w * c2;
            m3[static_cast<size_t>(d)] += w * c2 * c[d];
            m4[static_cast<size_t>(d)] += w * c2 * c2;
        }
    });
    for (int d = 0; d < dims; ++d) {
        const double v = m2[static_cast<size_t>(d)] / total;
        report.variance[static_cast<size_t>(d)] = v;
        const double sd = std::sqrt(std::max(v, 1e-300));
        report.skewness[static_cast<size_t>(d)] = m3[static_cast<size_t>(d)] / total / (sd * sd * sd);
        report.excess_kurtosis[static_cast<size_t>(d)] = m4[static_cast<size_t>(d)] / total / (v * v) - 3.0;
    }
    report.modality = count_local_maxima(density);
    return report;
}

bool MomentReport::is_gaussian(double tol) const {
    for (size_t d = 0; d < mean.size(); ++d) {
        if (std::abs(skewness[d]) >= tol || std::abs(excess_kurtosis[d]) >= tol) return false;
    }
    return modality <= 1;
}

GridDensity compose_from_density(const Denoiser& net, const NoiseSchedule& schedule, int t_hi,
                                 int t_lo, const GridDensity& start) {
    if (!(t_hi > t_lo && t_lo >= 0)) throw std::invalid_argument("compose: need t_hi > t_lo >= 0");
    schedule.validate_t(t_hi);
    GridDensity density = start;
    for (int t = t_hi; t > t_lo; --t) apply_kernel_step(net, schedule, t, density);
    return density;
}

KernelGridResult compose_kernel_grid(const Denoiser& net, const NoiseSchedule& schedule, int t_hi,
                                     int t_lo, const Vec& x_start, const GridSpec& grid) {
    grid.validate();
    if (!(t_hi > t_lo && t_lo >= 0)) throw std::invalid_argument("compose_kernel_grid: need t_hi > t_lo >= 0");
    schedule.validate_t(t_hi);
    if (x_start.size() != static_cast<size_t>(grid.dims())) {
        throw std::invalid_argument("compose_kernel_grid: start state dim mismatch");
    }
    if (net.data_dim != grid.dims()) throw std::invalid_argument("compose_kernel_grid: net dim mismatch");

    KernelGridResult result;
    result.density.grid = grid;
    result.density.values.assign(grid.cell_count(), 0.0);

    // First transition from the point mass, evaluated analytically.
    const Vec mu = posterior_mean(net, schedule, x_start, t_hi);
    deposit(grid, result.density.values, mu, std::sqrt(schedule.posterior_variance(t_hi)), 1.0);

    for (int t = t_hi - 1; t > t_lo; --t) apply_kernel_step(net, schedule, t, result.density);

    result.leaked_mass = 1.0 - result.density.mass();
    if (std::abs(result.leaked_mass) > kLeakTolerance) {
        throw std::runtime_error("compose_kernel_grid: grid too coarse, boundary mass leakage " +
                                 std::to_string(result.leaked_mass));
    }
    result.moments = grid_moments(result.density);
    return result;
}

double total_variation(const GridDensity& a, const GridDensity& b) {
    if (a.values.size() != b.values.size()) throw std::invalid_argument("total_variation: grid mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) s += std::abs(a.values[i] - b.values[i]);
    return 0.5 * s * a.grid.cell_volume();
}

void dump_matrix(const GridDensity& density, std::ostream& os) {
    const GridSpec& grid = density.grid;
    if (grid.dims() == 1) {
        for (int i = 0; i < grid.resolution[0]; ++i) {
            os << density.values[static_cast<size_t>(i)];
            os << (i + 1 == grid.resolution[0] ? '\n' : ' ');
        }
        return;
    }
    const int n1 = grid.resolution[1];
    for (int j = n1 - 1; j >= 0; --j) {
        for (int i = 0; i < grid.resolution[0]; ++i) {
            os << density.values[static_cast<size_t>(i) * n1 + j];
            os << (i + 1 == grid.resolution[0] ? '\n' : ' ');
        }
    }
}

}  // namespace diffrl
