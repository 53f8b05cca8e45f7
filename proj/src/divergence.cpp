// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#include "diffrl/divergence.hpp"

#include <algorithm>
#include <cmath>

namespace diffrl {

GaussianParams GaussianParams::isotropic(Vec mean, double stddev) {
    GaussianParams g;
    g.stddev.assign(mean.size(), stddev);
    g.mean = std::move(mean);
    return g;
}

void GaussianParams::validate() const {
    if (mean.size() != stddev.size()) throw std::invalid_argument("GaussianParams: size mismatch");
    if (mean.empty()) throw std::invalid_argument("GaussianParams: empty");
    for (size_t i = 0; i < stddev.size(); ++i) {
        if (!(stddev[i] > 0.0) || !std::isfinite(stddev[i]) || !std::isfinite(mean[i])) {
            throw std::invalid_argument("GaussianParams: invalid entry at dim " + std::to_string(i));
        }
    }
}

void DivergenceSpec::validate() const {
    if (kind == DivergenceKind::renyi) {
        if (!(alpha > 0.0) || alpha == 1.0) {
            throw std::invalid_argument("renyi divergence requires alpha > 0 and alpha != 1");
        }
    }
    if (kind == DivergenceKind::power) {
        if (lambda == 0.0 || lambda == -1.0) {
            throw std::invalid_argument("power divergence requires lambda not in {0, -1}");
        }
    }
}

const char* divergence_kind_name(DivergenceKind kind) {
    switch (kind) {
        case DivergenceKind::kl: return "kl";
        case DivergenceKind::js: return "js";
        case DivergenceKind::chi2: return "chi2";
        case DivergenceKind::power: return "power";
        case DivergenceKind::renyi: return "renyi";
    }
    return "?";
}

DivergenceKind divergence_kind_from_name(const std::string& name) {
    if (name == "kl") return DivergenceKind::kl;
    if (name == "js") return DivergenceKind::js;
    if (name == "chi2") return DivergenceKind::chi2;
    if (name == "power") return DivergenceKind::power;
    if (name == "renyi") return DivergenceKind::renyi;
    throw std::invalid_argument("unknown divergence kind: " + name);
}

namespace {

[[noreturn]] void domain_error(const char* kind, size_t dim, const std::string& condition) {
    throw std::domain_error(std::string(kind) + " divergence undefined at dim " +
                            std::to_string(dim) + ": requires " + condition);
}

void check_domain_1d(const DivergenceSpec& spec, double sp, double sq, size_t dim) {
    switch (spec.kind) {
        case DivergenceKind::chi2:
            if (!(2.0 * sq * sq - sp * sp > 0.0)) domain_error("chi2", dim, "2*std_q^2 - std_p^2 > 0");
            break;
        case DivergenceKind::renyi:
            if (!((1.0 - spec.alpha) * sp * sp + spec.alpha * sq * sq > 0.0)) {
                domain_error("renyi", dim, "(1-alpha)*std_p^2 + alpha*std_q^2 > 0");
            }
            break;
        case DivergenceKind::power:
            if (!((spec.lambda + 1.0) * sq * sq - spec.lambda * sp * sp > 0.0)) {
                domain_error("power", dim, "(lambda+1)*std_q^2 - lambda*std_p^2 > 0");
            }
            break;
        default:
            break;
    }
}

double log_normal_pdf(double x, double mu, double s) {
    const double z = (x - mu) / s;
    return -0.5 * std::log(2.0 * M_PI) - std::log(s) - 0.5 * z * z;
}

double logaddexp(double a, double b) {
    const double m = std::max(a, b);
    if (!std::isfinite(m)) return m;
    return m + std::log1p(std::exp(std::min(a, b) - m));
}

// --- closed forms per dimension, with gradients w.r.t. (mu_p, std_p) ---

double kl_1d(double mp, double sp, double mq, double sq, double* dm = nullptr, double* ds = nullptr) {
    const double delta = mp - mq;
    const double val = std::log(sq / sp) + (sp * sp + delta * delta) / (2.0 * sq * sq) - 0.5;
    if (dm) *dm = delta / (sq * sq);
    if (ds) *ds = -1.0 / sp + sp / (sq * sq);
    return val;
}

double chi2_1d(double mp, double sp, double mq, double sq, double* dm = nullptr, double* ds = nullptr) {
    const double a = 2.0 * sq * sq - sp * sp;
    const double delta = mp - mq;
    const double e = sq * sq / (sp * std::sqrt(a)) * std::exp(delta * delta / a);
    if (dm) *dm = e * 2.0 * delta / a;
    if (ds) *ds = e * (-1.0 / sp + sp / a + 2.0 * sp * delta * delta / (a * a));
    return e - 1.0;
}

double renyi_1d(double alpha, double mp, double sp, double mq, double sq, double* dm = nullptr,
                double* ds = nullptr) {
    const double s = (1.0 - alpha) * sp * sp + alpha * sq * sq;
    const double delta = mp - mq;
    const double val = alpha * delta * delta / (2.0 * s) +
                       ((1.0 - alpha) * std::log(sp) + alpha * std::log(sq) - 0.5 * std::log(s)) /
                           (alpha - 1.0);
    if (dm) *dm = alpha * delta / s;
    if (ds) {
        *ds = -alpha * (1.0 - alpha) * delta * delta * sp / (s * s) - (1.0 / sp - sp / s);
    }
    return val;
}

// --- quadrature machinery (1d) ---

struct GridRange {
    double lo, hi;
};

// The integration window must cover the slowest-decaying factor of the
// integrand. For chi2 / power / renyi that factor is a Gaussian with its own
// center and a scale sigma_p sigma_q / sqrt(den) that blows up near the
// domain boundary, so the window is taken over all contributing Gaussians
// with 10 standard deviations of margin each.
GridRange quad_range(const DivergenceSpec& spec, double mp, double sp, double mq, double sq) {
    double lo = std::min(mp - 10.0 * sp, mq - 10.0 * sq);
    double hi = std::max(mp + 10.0 * sp, mq + 10.0 * sq);
    auto widen = [&](double center, double scale) {
        lo = std::min(lo, center - 10.0 * scale);
        hi = std::max(hi, center + 10.0 * scale);
    };
    const double sp2 = sp * sp, sq2 = sq * sq;
    switch (spec.kind) {
        case DivergenceKind::chi2: {
            const double den = 2.0 * sq2 - sp2;
            widen((2.0 * sq2 * mp - sp2 * mq) / den, sp * sq / std::sqrt(den));
            break;
        }
        case DivergenceKind::power: {
            const double l = spec.lambda;
            const double den = (l + 1.0) * sq2 - l * sp2;
            widen(((l + 1.0) * mp * sq2 - l * mq * sp2) / den, sp * sq / std::sqrt(den));
            break;
        }
        case DivergenceKind::renyi: {
            const double a = spec.alpha;
            const double den = (1.0 - a) * sp2 + a * sq2;
            widen((a * mp * sq2 + (1.0 - a) * mq * sp2) / den, sp * sq / std::sqrt(den));
            break;
        }
        default:
            break;
    }
    return {lo, hi};
}

// Trapezoid sum of an integrand over n points.
template <typename F>
double trapezoid(const GridRange& r, int n, F&& f) {
    const double h = (r.hi - r.lo) / (n - 1);
    double sum = 0.5 * (f(r.lo) + f(r.hi));
    for (int i = 1; i < n - 1; ++i) sum += f(r.lo + h * i);
    const double v = sum * h;
    if (!std::isfinite(v)) throw std::runtime_error("divergence quadrature: non-finite integrand");
    return v;
}

double js_integrand(double x, double mp, double sp, double mq, double sq) {
    const double lp = log_normal_pdf(x, mp, sp);
    const double lq = log_normal_pdf(x, mq, sq);
    const double lm = logaddexp(lp, lq) - std::log(2.0);
    double acc = 0.0;
    if (lp > -700.0) acc += 0.5 * std::exp(lp) * (lp - lm);
    if (lq > -700.0) acc += 0.5 * std::exp(lq) * (lq - lm);
    return acc;
}

double power_kernel_integrand(double lambda, double x, double mp, double sp, double mq, double sq) {
    // integrand of E_p[(p/q)^lambda]
    const double lp = log_normal_pdf(x, mp, sp);
    const double lq = log_normal_pdf(x, mq, sq);
    const double e = (lambda + 1.0) * lp - lambda * lq;
    return e > -700.0 ? std::exp(e) : 0.0;
}

double renyi_kernel_integrand(double alpha, double x, double mp, double sp, double mq, double sq) {
    const double lp = log_normal_pdf(x, mp, sp);
    const double lq = log_normal_pdf(x, mq, sq);
    const double e = alpha * lp + (1.0 - alpha) * lq;
    return e > -700.0 ? std::exp(e) : 0.0;
}

double kl_integrand(double x, double mp, double sp, double mq, double sq) {
    const double lp = log_normal_pdf(x, mp, sp);
    if (lp <= -700.0) return 0.0;
    const double lq = log_normal_pdf(x, mq, sq);
    return std::exp(lp) * (lp - lq);
}

double chi2_integrand(double x, double mp, double sp, double mq, double sq) {
    const double lp = log_normal_pdf(x, mp, sp);
    const double lq = log_normal_pdf(x, mq, sq);
    const double e = 2.0 * lp - lq;
    return e > -700.0 ? std::exp(e) : 0.0;
}

// Adaptive refinement: doubles the grid until the value settles.
template <typename F>
double adaptive_quadrature(const GridRange& r, F&& f) {
    int n = 2049;
    double prev = trapezoid(r, n, f);
    while (n < (1 << 17)) {
        n = 2 * (n - 1) + 1;
        const double cur = trapezoid(r, n, f);
        if (std::abs(cur - prev) < 1e-10) return cur;
        prev = cur;
    }
    return prev;
}

double js_1d(double mp, double sp, double mq, double sq) {
    const GridRange r = quad_range({DivergenceKind::js}, mp, sp, mq, sq);
    return adaptive_quadrature(r, [&](double x) { return js_integrand(x, mp, sp, mq, sq); });
}

double power_1d(double lambda, double mp, double sp, double mq, double sq) {
    const GridRange r = quad_range({DivergenceKind::power, 0.5, lambda}, mp, sp, mq, sq);
    const double kernel = adaptive_quadrature(
        r, [&](double x) { return power_kernel_integrand(lambda, x, mp, sp, mq, sq); });
    return (kernel - 1.0) / (lambda * (lambda + 1.0));
}

// Quadrature gradients on a fixed grid; ddp_* are d p(x)/d theta factors.
constexpr int kGradGridPoints = (1 << 14) + 1;

void js_grad_1d(double mp, double sp, double mq, double sq, double& dm, double& ds) {
    const GridRange r = quad_range({DivergenceKind::js}, mp, sp, mq, sq);
    auto common = [&](double x, double& w, double& p) {
        const double lp = log_normal_pdf(x, mp, sp);
        const double lq = log_normal_pdf(x, mq, sq);
        const double lm = logaddexp(lp, lq) - std::log(2.0);
        p = lp > -700.0 ? std::exp(lp) : 0.0;
        w = 0.5 * (lp - lm);
    };
    dm = trapezoid(r, kGradGridPoints, [&](double x) {
        double w, p;
        common(x, w, p);
        return w * p * (x - mp) / (sp * sp);
    });
    ds = trapezoid(r, kGradGridPoints, [&](double x) {
        double w, p;
        common(x, w, p);
        const double z = (x - mp) / sp;
        return w * p * (z * z - 1.0) / sp;
    });
}

void power_grad_1d(double lambda, double mp, double sp, double mq, double sq, double& dm,
                   double& ds) {
    const GridRange r = quad_range({DivergenceKind::power, 0.5, lambda}, mp, sp, mq, sq);
    auto weight = [&](double x, double& w, double& p) {
        const double lp = log_normal_pdf(x, mp, sp);
        const double lq = log_normal_pdf(x, mq, sq);
        p = lp > -700.0 ? std::exp(lp) : 0.0;
        const double e = lambda * (lp - lq);
        w = (e > -700.0 && e < 700.0) ? std::exp(e) / lambda : 0.0;
    };
    dm = trapezoid(r, kGradGridPoints, [&](double x) {
        double w, p;
        weight(x, w, p);
        return w * p * (x - mp) / (sp * sp);
    });
    ds = trapezoid(r, kGradGridPoints, [&](double x) {
        double w, p;
        weight(x, w, p);
        const double z = (x - mp) / sp;
        return w * p * (z * z - 1.0) / sp;
    });
}

double divergence_1d(const DivergenceSpec& spec, double mp, double sp, double mq, double sq,
                     size_t dim, double* dm, double* ds) {
    check_domain_1d(spec, sp, sq, dim);
    switch (spec.kind) {
        case DivergenceKind::kl:
            return kl_1d(mp, sp, mq, sq, dm, ds);
        case DivergenceKind::chi2:
            return chi2_1d(mp, sp, mq, sq, dm, ds);
        case DivergenceKind::renyi:
            return renyi_1d(spec.alpha, mp, sp, mq, sq, dm, ds);
        case DivergenceKind::js: {
            const double v = js_1d(mp, sp, mq, sq);
            if (dm && ds) js_grad_1d(mp, sp, mq, sq, *dm, *ds);
            return v;
        }
        case DivergenceKind::power: {
            const double v = power_1d(spec.lambda, mp, sp, mq, sq);
            if (dm && ds) power_grad_1d(spec.lambda, mp, sp, mq, sq, *dm, *ds);
            return v;
        }
    }
    throw std::logic_error("unreachable divergence kind");
}

}  // namespace

double divergence(const DivergenceSpec& spec, const GaussianParams& p, const GaussianParams& q) {
    spec.validate();
    p.validate();
    q.validate();
    if (p.mean.size() != q.mean.size()) throw std::invalid_argument("divergence: dim mismatch");
    double total = 0.0;
    for (size_t i = 0; i < p.mean.size(); ++i) {
        total += divergence_1d(spec, p.mean[i], p.stddev[i], q.mean[i], q.stddev[i], i, nullptr,
                               nullptr);
    }
    return total;
}

double divergence_grad(const DivergenceSpec& spec, const GaussianParams& p,
                       const GaussianParams& q, Vec& dmean, Vec& dstddev) {
    spec.validate();
    p.validate();
    q.validate();
    if (p.mean.size() != q.mean.size()) throw std::invalid_argument("divergence: dim mismatch");
    dmean.assign(p.mean.size(), 0.0);
    dstddev.assign(p.mean.size(), 0.0);
    double total = 0.0;
    for (size_t i = 0; i < p.mean.size(); ++i) {
        total += divergence_1d(spec, p.mean[i], p.stddev[i], q.mean[i], q.stddev[i], i, &dmean[i],
                               &dstddev[i]);
    }
    return total;
}

double quadrature_oracle(const DivergenceSpec& spec, const GaussianParams& p,
                         const GaussianParams& q, int grid_points) {
    spec.validate();
    p.validate();
    q.validate();
    if (p.mean.size() != 1 || q.mean.size() != 1) {
        throw std::invalid_argument("quadrature_oracle: 1-dimensional Gaussians only");
    }
    if (grid_points < 1024) throw std::invalid_argument("quadrature_oracle: grid_points must be >= 1024");

    const double mp = p.mean[0], sp = p.stddev[0], mq = q.mean[0], sq = q.stddev[0];
    check_domain_1d(spec, sp, sq, 0);
    const GridRange r = quad_range(spec, mp, sp, mq, sq);
    switch (spec.kind) {
        case DivergenceKind::kl:
            return trapezoid(r, grid_points, [&](double x) { return kl_integrand(x, mp, sp, mq, sq); });
        case DivergenceKind::js:
            return trapezoid(r, grid_points, [&](double x) { return js_integrand(x, mp, sp, mq, sq); });
        case DivergenceKind::chi2:
            return trapezoid(r, grid_points,
                             [&](double x) { return chi2_integrand(x, mp, sp, mq, sq); }) -
                   1.0;
        case DivergenceKind::power: {
            const double kernel = trapezoid(r, grid_points, [&](double x) {
                return power_kernel_integrand(spec.lambda, x, mp, sp, mq, sq);
            });
            return (kernel - 1.0) / (spec.lambda * (spec.lambda + 1.0));
        }
        case DivergenceKind::renyi: {
            const double kernel = trapezoid(r, grid_points, [&](double x) {
                return renyi_kernel_integrand(spec.alpha, x, mp, sp, mq, sq);
            });
            return std::log(kernel) / (spec.alpha - 1.0);
        }
    }
    throw std::logic_error("unreachable divergence kind");
}

}  // namespace diffrl
