#pragma once

// Reference implementations used only by tests. They follow the defining
// formulas literally (no centering, no shifting, no shared passes) so they
// fail independently of the library code they check.

#include "hazard_dantzig/common.hpp"
#include "hazard_dantzig/survival_sim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using hazard_dantzig::Matrix;
using hazard_dantzig::Rng;
using hazard_dantzig::SurvivalDataset;
using hazard_dantzig::Vector;

/// (1/n) sum over events of [Z_i'b - log sum_{X_j >= X_i} exp(Z_j'b)].
inline double naive_loglik(const SurvivalDataset& d, const Vector& b) {
    double l = 0.0;
    for (int i = 0; i < d.n(); ++i) {
        if (d.status[static_cast<std::size_t>(i)] != 1) continue;
        double s0 = 0.0;
        for (int j = 0; j < d.n(); ++j)
            if (d.time[j] >= d.time[i]) s0 += std::exp(d.covariates.row(j).dot(b));
        l += d.covariates.row(i).dot(b) - std::log(s0);
    }
    return l / d.n();
}

inline Vector naive_score(const SurvivalDataset& d, const Vector& b) {
    Vector u = Vector::Zero(d.p());
    for (int i = 0; i < d.n(); ++i) {
        if (d.status[static_cast<std::size_t>(i)] != 1) continue;
        double s0 = 0.0;
        Vector s1 = Vector::Zero(d.p());
        for (int j = 0; j < d.n(); ++j) {
            if (d.time[j] < d.time[i]) continue;
            const double w = std::exp(d.covariates.row(j).dot(b));
            s0 += w;
            s1 += w * d.covariates.row(j).transpose();
        }
        u += d.covariates.row(i).transpose() - s1 / s0;
    }
    return u / d.n();
}

/// Central differences of f at x with step h.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
    Vector g(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        Vector a = x, c = x;
        a[k] += h;
        c[k] -= h;
        g[k] = (f(a) - f(c)) / (2.0 * h);
    }
    return g;
}

/// Central-difference Jacobian of a vector function.
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, double h) {
    const Vector f0 = f(x);
    Matrix J(f0.size(), x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        Vector a = x, c = x;
        a[k] += h;
        c[k] -= h;
        J.col(k) = (f(a) - f(c)) / (2.0 * h);
    }
    return J;
}

/// Small random dataset with optional tied times; covariates in (-1, 1).
inline SurvivalDataset random_dataset(Rng& rng, int n, int p, bool ties = false) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::uniform_real_distribution<double> pos(0.05, 5.0);
    SurvivalDataset d;
    d.time.resize(n);
    d.status.resize(static_cast<std::size_t>(n));
    d.covariates.resize(n, p);
    for (int i = 0; i < n; ++i) {
        d.time[i] = ties ? std::round(pos(rng) * 2.0) / 2.0 + 0.5 : pos(rng);
        d.status[static_cast<std::size_t>(i)] = unif(rng) < 0.5 ? 1 : 0;
        for (int j = 0; j < p; ++j) d.covariates(i, j) = unif(rng);
    }
    d.status[0] = 1;
    d.tau = d.time.maxCoeff();
    return d;
}

inline Vector random_vector(Rng& rng, int p, double scale) {
    std::uniform_real_distribution<double> unif(-scale, scale);
    Vector v(p);
    for (int j = 0; j < p; ++j) v[j] = unif(rng);
    return v;
}

/// Wishart-type PSD matrix B'B/m with B m x p standard normal.
inline Matrix random_psd(Rng& rng, int p, int m) {
    std::normal_distribution<double> normal;
    Matrix B(m, p);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < p; ++j) B(i, j) = normal(rng);
    return B.transpose() * B / m;
}

/// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double F = cdf(x[i]);
        d = std::max({d, (i + 1) / n - F, F - i / n});
    }
    return d;
}

}  // namespace oracle
