#include "hazard_dantzig/factors.hpp"

#include "hazard_dantzig/json_util.hpp"
#include "hazard_dantzig/partial_likelihood.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace hazard_dantzig {

// =============================================================================
// SupportSet
// =============================================================================

SupportSet::SupportSet(std::vector<int> indices) : indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
    indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
}

SupportSet SupportSet::first(int s) {
    std::vector<int> idx(static_cast<std::size_t>(std::max(s, 0)));
    std::iota(idx.begin(), idx.end(), 0);
    return SupportSet(std::move(idx));
}

SupportSet SupportSet::from_one_based(const std::vector<int>& indices) {
    std::vector<int> idx;
    idx.reserve(indices.size());
    for (int j : indices) {
        if (j < 1) throw ConfigError("support indices are 1-based and must be >= 1");
        idx.push_back(j - 1);
    }
    return SupportSet(std::move(idx));
}

bool SupportSet::contains(int j) const { return std::binary_search(indices_.begin(), indices_.end(), j); }

void SupportSet::validate(int p) const {
    if (indices_.empty()) throw ConfigError("support set must be nonempty");
    if (indices_.front() < 0 || indices_.back() >= p)
        throw ConfigError("support index out of range for p = " + std::to_string(p));
}

std::vector<int> SupportSet::complement(int p) const {
    std::vector<int> out;
    for (int j = 0; j < p; ++j)
        if (!contains(j)) out.push_back(j);
    return out;
}

// =============================================================================
// Ratios
// =============================================================================

namespace {

double quad(const Matrix& M, const Vector& h) { return std::max(h.dot(M * h), 0.0); }

double support_l1(const SupportSet& T0, const Vector& h) {
    double a = 0.0;
    for (int j : T0.indices()) a += std::abs(h[j]);
    return a;
}

double off_support_l1(const SupportSet& T0, const Vector& h) { return l1_norm(h) - support_l1(T0, h); }

}  // namespace

bool in_cone(const SupportSet& T0, const Vector& h, double tol) {
    return off_support_l1(T0, h) <= support_l1(T0, h) + tol;
}

double compatibility_ratio(const Matrix& M, const SupportSet& T0, const Vector& h) {
    return std::sqrt(static_cast<double>(T0.size()) * quad(M, h)) / support_l1(T0, h);
}

double weak_cone_ratio(const Matrix& M, const SupportSet& T0, double q, const Vector& h) {
    return std::pow(static_cast<double>(T0.size()), 1.0 / q) * quad(M, h) / (support_l1(T0, h) * lq_norm(h, q));
}

double restricted_eigen_ratio(const Matrix& M, const Vector& h) { return std::sqrt(quad(M, h)) / h.norm(); }

double phi_ratio(const Matrix& M, const SupportSet& T0, const Vector& h) {
    const int p = static_cast<int>(h.size());
    const int S = T0.size();
    std::vector<double> outside;
    double inside = 0.0;
    for (int j = 0; j < p; ++j) {
        if (T0.contains(j))
            inside += h[j] * h[j];
        else
            outside.push_back(h[j] * h[j]);
    }
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(S), outside.size());
    std::partial_sort(outside.begin(), outside.begin() + static_cast<std::ptrdiff_t>(k), outside.end(),
                      std::greater<>());
    for (std::size_t m = 0; m < k; ++m) inside += outside[m];
    return std::sqrt(quad(M, h)) / std::sqrt(inside);
}

// =============================================================================
// Optimizer machinery
// =============================================================================

namespace {

constexpr long long kPhiSupersetBudget = 10000;

long long binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    long double r = 1.0L;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    const long double cap = static_cast<long double>(std::numeric_limits<long long>::max() / 4);
    return r > cap ? std::numeric_limits<long long>::max() / 4 : static_cast<long long>(std::llround(r));
}

constexpr std::uint64_t kRestartStream = 0x72737472;  // "rstr"
constexpr std::uint64_t kOracleStream = 0x6f72636c;   // "orcl"

Vector project_l1_ball(const Vector& v, double radius) {
    if (l1_norm(v) <= radius) return v;
    std::vector<double> u(static_cast<std::size_t>(v.size()));
    for (Eigen::Index j = 0; j < v.size(); ++j) u[static_cast<std::size_t>(j)] = std::abs(v[j]);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cumsum += u[j];
        const double t = (cumsum - radius) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) theta = t;
    }
    Vector w(v.size());
    for (Eigen::Index j = 0; j < v.size(); ++j) w[j] = std::copysign(std::max(std::abs(v[j]) - theta, 0.0), v[j]);
    return w;
}

/// Index bookkeeping shared by every cone problem.
struct ConeLayout {
    int p;
    int S;
    std::vector<int> T;
    std::vector<int> Tc;

    ConeLayout(const SupportSet& T0, int p_) : p(p_), S(T0.size()), T(T0.indices()), Tc(T0.complement(p_)) {}

    Vector gather_complement(const Vector& h) const {
        Vector v(static_cast<Eigen::Index>(Tc.size()));
        for (std::size_t k = 0; k < Tc.size(); ++k) v[static_cast<Eigen::Index>(k)] = h[Tc[k]];
        return v;
    }
    void scatter_complement(Vector& h, const Vector& v) const {
        for (std::size_t k = 0; k < Tc.size(); ++k) h[Tc[k]] = v[static_cast<Eigen::Index>(k)];
    }
};

/**
 * D_s = { h : s'h_T = 1, ||h_{T^c}||_1 <= 1 } for a sign pattern s on T.
 * Every h in D_s lies in the cone, and every nonzero cone direction with
 * sign(h_T) = s rescales into D_s; the union over s covers the cone.
 */
struct SignFace {
    const ConeLayout* layout;
    Vector signs;

    void project(Vector& h) const {
        const int S = layout->S;
        double a = 0.0;
        for (int k = 0; k < S; ++k) a += signs[k] * h[layout->T[static_cast<std::size_t>(k)]];
        const double shift = (a - 1.0) / S;
        for (int k = 0; k < S; ++k) h[layout->T[static_cast<std::size_t>(k)]] -= shift * signs[k];
        if (!layout->Tc.empty()) layout->scatter_complement(h, project_l1_ball(layout->gather_complement(h), 1.0));
    }
};

std::vector<Vector> sign_patterns(int S, int restarts, Rng& rng) {
    std::vector<Vector> out;
    if (S <= 16) {
        const long long count = 1LL << (S - 1);  // objectives are even in h: fix the first sign
        for (long long mask = 0; mask < count; ++mask) {
            Vector s = Vector::Ones(S);
            for (int k = 1; k < S; ++k)
                if (mask & (1LL << (k - 1))) s[k] = -1.0;
            out.push_back(std::move(s));
        }
    } else {
        for (int r = 0; r < std::max(restarts, 1); ++r) {
            Vector s = Vector::Ones(S);
            for (int k = 1; k < S; ++k) s[k] = open_unit(rng) < 0.5 ? -1.0 : 1.0;
            out.push_back(std::move(s));
        }
    }
    return out;
}

/// Random direction in the cone, biased toward its boundary and toward sparse off-support parts.
Vector sample_cone(const ConeLayout& L, Rng& rng) {
    std::normal_distribution<double> normal;
    Vector h = Vector::Zero(L.p);
    const double mode = open_unit(rng);
    for (int j : L.T) h[j] = mode < 0.25 ? (open_unit(rng) < 0.5 ? -1.0 : 1.0) * (1.0 + 0.05 * normal(rng))
                                         : normal(rng);
    if (L.Tc.empty()) return h;
    double a = 0.0;
    for (int j : L.T) a += std::abs(h[j]);
    Vector v = Vector::Zero(static_cast<Eigen::Index>(L.Tc.size()));
    if (open_unit(rng) < 0.5) {
        for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = normal(rng);
    } else {
        const auto m = static_cast<int>(L.Tc.size());
        const int count = 1 + static_cast<int>(open_unit(rng) * m) % m;
        for (int c = 0; c < count; ++c) v[static_cast<Eigen::Index>(open_unit(rng) * m) % m] = normal(rng);
    }
    const double norm = l1_norm(v);
    if (norm > 0.0) {
        const double u = open_unit(rng) < 0.3 ? 1.0 : std::cbrt(open_unit(rng));
        v *= u * a / norm;
    }
    L.scatter_complement(h, v);
    return h;
}

/**
 * Monotone accelerated projected gradient (MFISTA with backtracking and
 * adaptive restart). `project` maps onto (or retracts into) the feasible set.
 * Returns the best objective value; `x` holds the minimizer on exit.
 */
template <class Value, class Gradient, class Project>
double descend(const Value& value, const Gradient& gradient, const Project& project, Vector& x,
               const FactorOptions& opts) {
    project(x);
    double fx = value(x);
    Vector y = x, z, g, x_prev;
    double t = 1.0;
    double lipschitz = 1.0;
    int stagnant = 0;
    for (int it = 0; it < opts.max_iters; ++it) {
        const double fy = value(y);
        g = gradient(y);
        double fz = 0.0;
        Vector d;
        while (true) {
            z = y - g / lipschitz;
            project(z);
            d = z - y;
            fz = value(z);
            if (fz <= fy + g.dot(d) + 0.5 * lipschitz * d.squaredNorm() + 1e-15 * std::abs(fy) || lipschitz > 1e30)
                break;
            lipschitz *= 2.0;
        }
        x_prev = x;
        const bool improved = fz <= fx;
        if (improved) {
            stagnant = (fx - fz <= 1e-15 * std::max(std::abs(fx), 1e-300)) ? stagnant + 1 : 0;
            x = z;
            fx = fz;
        } else {
            ++stagnant;
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        if (improved) {
            y = x + ((t - 1.0) / t_next) * (x - x_prev);
            t = t_next;
        } else {
            y = x;
            t = 1.0;
        }
        project(y);
        lipschitz = std::max(lipschitz * 0.9, 1e-12);
        if (d.norm() <= opts.tol * (1.0 + y.norm()) && improved) break;
        if (stagnant >= 200) break;
    }
    return fx;
}

struct ConeSearch {
    const Matrix& M;
    const SupportSet& T0;
    const FactorOptions& opts;
    ConeLayout layout;

    ConeSearch(const Matrix& M_, const SupportSet& T0_, const FactorOptions& opts_)
        : M(M_), T0(T0_), opts(opts_), layout(T0_, static_cast<int>(M_.rows())) {}

    /// Rescales a cone direction into the D_s face matching its support signs.
    std::optional<std::pair<Vector, Vector>> to_face(Vector h) const {
        if (h.size() != layout.p || !h.allFinite()) return std::nullopt;
        double a = support_l1(T0, h);
        if (a <= 0.0) return std::nullopt;
        double off = off_support_l1(T0, h);
        if (off > a)
            for (int j : layout.Tc) h[j] *= a / off;
        Vector s(layout.S);
        for (int k = 0; k < layout.S; ++k) s[k] = h[layout.T[static_cast<std::size_t>(k)]] < 0.0 ? -1.0 : 1.0;
        if (s[0] < 0.0) {
            s = -s;
            h = -h;
        }
        return std::make_pair(Vector(h / a), s);
    }

    /**
     * Runs descent on every sign face from a canonical start, `opts.restarts`
     * random starts spread over faces, and every user seed; then the
     * dense-sampling oracle. `ratio` is the factor's defining quotient.
     */
    template <class Value, class Gradient, class Ratio>
    FactorEstimate run(const Value& value, const Gradient& gradient, const Ratio& ratio) const {
        FactorEstimate est;
        est.descent_value = std::numeric_limits<double>::infinity();
        Rng rng = make_rng(opts.seed, kRestartStream);
        const auto patterns = sign_patterns(layout.S, opts.restarts, rng);

        auto attempt = [&](Vector h, const Vector& s) {
            SignFace face{&layout, s};
            descend(value, gradient, [&](Vector& v) { face.project(v); }, h, opts);
            const double r = ratio(h);
            ++est.restarts;
            if (r < est.descent_value) {
                est.descent_value = r;
                est.best_h = h;
            }
        };

        for (const auto& s : patterns) {
            Vector h = Vector::Zero(layout.p);
            for (int k = 0; k < layout.S; ++k) h[layout.T[static_cast<std::size_t>(k)]] = s[k] / layout.S;
            attempt(h, s);
        }
        for (int r = 0; r < opts.restarts; ++r) {
            const Vector& s = patterns[static_cast<std::size_t>(r) % patterns.size()];
            Vector h = sample_cone(layout, rng);
            for (int k = 0; k < layout.S; ++k) {
                const int j = layout.T[static_cast<std::size_t>(k)];
                h[j] = s[k] * std::abs(h[j]);
            }
            auto face = to_face(h);
            if (face) attempt(face->first, s);
        }
        for (const auto& seed : opts.seeds) {
            auto face = to_face(seed);
            if (face) attempt(face->first, face->second);
        }

        est.oracle_value = std::numeric_limits<double>::infinity();
        Vector oracle_h;
        Rng orng = make_rng(opts.seed, kOracleStream);
        for (int i = 0; i < opts.oracle_samples; ++i) {
            const Vector h = sample_cone(layout, orng);
            const double r = ratio(h);
            if (r < est.oracle_value) {
                est.oracle_value = r;
                oracle_h = h;
            }
        }
        est.value = std::min(est.descent_value, est.oracle_value);
        if (est.oracle_value < est.descent_value) est.best_h = oracle_h;
        return est;
    }
};

void check_inputs(const Matrix& M, const SupportSet& T0) {
    check_symmetric_psd(M);
    T0.validate(static_cast<int>(M.rows()));
}

}  // namespace

void check_symmetric_psd(const Matrix& M) {
    if (M.rows() != M.cols() || M.rows() == 0) throw ConfigError("matrix must be square and nonempty");
    if (!M.allFinite()) throw ConfigError("matrix entries must be finite");
    const double scale = 1.0 + M.cwiseAbs().maxCoeff();
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) throw ConfigError("matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(M, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-8 * scale) throw ConfigError("matrix is not positive semidefinite");
}

FactorEstimate compatibility_factor(const Matrix& M, const SupportSet& T0, const FactorOptions& opts) {
    check_inputs(M, T0);
    const ConeSearch search(M, T0, opts);
    const double S = T0.size();
    return search.run([&](const Vector& h) { return S * h.dot(M * h); },
                      [&](const Vector& h) -> Vector { return 2.0 * S * (M * h); },
                      [&](const Vector& h) { return compatibility_ratio(M, T0, h); });
}

FactorEstimate weak_cone_invertibility_factor(const Matrix& M, const SupportSet& T0, double q,
                                              const FactorOptions& opts) {
    if (!(q >= 1.0) || !std::isfinite(q)) throw ConfigError("weak cone invertibility factor needs q >= 1");
    check_inputs(M, T0);
    const ConeSearch search(M, T0, opts);
    const double scale = std::pow(static_cast<double>(T0.size()), 1.0 / q);
    auto value = [&](const Vector& h) { return scale * h.dot(M * h) / lq_norm(h, q); };
    auto gradient = [&](const Vector& h) -> Vector {
        const Vector Mh = M * h;
        const double nq = lq_norm(h, q);
        Vector dn(h.size());
        for (Eigen::Index j = 0; j < h.size(); ++j) {
            const double a = std::abs(h[j]);
            dn[j] = q == 1.0 ? (h[j] > 0 ? 1.0 : (h[j] < 0 ? -1.0 : 0.0))
                             : std::copysign(std::pow(a / nq, q - 1.0), h[j]);
        }
        return scale * (2.0 * Mh / nq - h.dot(Mh) * dn / (nq * nq));
    };
    return search.run(value, gradient, [&](const Vector& h) { return weak_cone_ratio(M, T0, q, h); });
}

FactorEstimate restricted_eigenvalue(const Matrix& M, const SupportSet& T0, const FactorOptions& opts) {
    check_inputs(M, T0);
    const ConeSearch search(M, T0, opts);
    auto value = [&](const Vector& h) { return h.dot(M * h) / h.squaredNorm(); };
    auto gradient = [&](const Vector& h) -> Vector {
        const double nn = h.squaredNorm();
        const Vector Mh = M * h;
        return 2.0 * (Mh - (h.dot(Mh) / nn) * h) / nn;
    };
    return search.run(value, gradient, [&](const Vector& h) { return restricted_eigen_ratio(M, h); });
}

FactorEstimate phi_2s(const Matrix& M, const SupportSet& T0, const FactorOptions& opts) {
    check_inputs(M, T0);
    const int p = static_cast<int>(M.rows());
    const int S = T0.size();
    if (2 * S > p) throw ConfigError("phi_2S needs 2S <= p");
    const ConeLayout layout(T0, p);

    FactorEstimate est;
    est.descent_value = std::numeric_limits<double>::infinity();
    Rng rng = make_rng(opts.seed, kRestartStream + 1);

    // Enumerate T = T0 + E with E a subset of T0^c of size 0..S.
    const int m = static_cast<int>(layout.Tc.size());
    long long supersets = 0;
    for (int size = 0; size <= S; ++size) supersets += binomial(m, size);
    if (supersets > kPhiSupersetBudget)
        throw ConfigError("phi_2S needs " + std::to_string(supersets) + " supersets of T0, over the budget of " +
                          std::to_string(kPhiSupersetBudget));
    std::vector<std::vector<int>> extensions{{}};
    for (int size = 1; size <= S; ++size) {
        std::vector<int> pick(static_cast<std::size_t>(size));
        std::iota(pick.begin(), pick.end(), 0);
        while (true) {
            std::vector<int> e;
            for (int k : pick) e.push_back(layout.Tc[static_cast<std::size_t>(k)]);
            extensions.push_back(std::move(e));
            int k = size - 1;
            while (k >= 0 && pick[static_cast<std::size_t>(k)] == m - size + k) --k;
            if (k < 0) break;
            ++pick[static_cast<std::size_t>(k)];
            for (int l = k + 1; l < size; ++l) pick[static_cast<std::size_t>(l)] = pick[static_cast<std::size_t>(l - 1)] + 1;
        }
    }

    const int per_set = std::max(1, opts.restarts / static_cast<int>(extensions.size()));

    auto optimize_on = [&](const std::vector<int>& extra, Vector h) {
        std::vector<char> in_T(static_cast<std::size_t>(p), 0);
        for (int j : T0.indices()) in_T[static_cast<std::size_t>(j)] = 1;
        for (int j : extra) in_T[static_cast<std::size_t>(j)] = 1;

        // Retraction into D_{T0,T}: clip outside-T entries to min_{T \ T0}|h_j|, restore the cone, normalize.
        auto retract = [&](Vector& v) {
            double floor_mag = std::numeric_limits<double>::infinity();
            for (int j : extra) floor_mag = std::min(floor_mag, std::abs(v[j]));
            for (int j = 0; j < p; ++j)
                if (!in_T[static_cast<std::size_t>(j)]) v[j] = std::clamp(v[j], -floor_mag, floor_mag);
            const double a = support_l1(T0, v);
            const double off = off_support_l1(T0, v);
            if (off > a && off > 0.0)
                for (int j : layout.Tc) v[j] *= a / off;
            const double nv = v.norm();
            if (nv > 0.0) v /= nv;
        };
        auto restricted_norm2 = [&](const Vector& v) {
            double s = 0.0;
            for (int j = 0; j < p; ++j)
                if (in_T[static_cast<std::size_t>(j)]) s += v[j] * v[j];
            return s;
        };
        auto value = [&](const Vector& v) {
            const double d = restricted_norm2(v);
            return d > 0.0 ? v.dot(M * v) / d : std::numeric_limits<double>::infinity();
        };
        auto gradient = [&](const Vector& v) -> Vector {
            const double d = restricted_norm2(v);
            const Vector Mv = M * v;
            Vector proj = v;
            for (int j = 0; j < p; ++j)
                if (!in_T[static_cast<std::size_t>(j)]) proj[j] = 0.0;
            return 2.0 * (Mv - (v.dot(Mv) / d) * proj) / d;
        };
        retract(h);
        if (!h.allFinite() || restricted_norm2(h) <= 0.0) return;
        descend(value, gradient, retract, h, opts);
        if (!in_cone(T0, h, 1e-12 * l1_norm(h))) return;
        const double r = phi_ratio(M, T0, h);
        ++est.restarts;
        if (r < est.descent_value) {
            est.descent_value = r;
            est.best_h = h;
        }
    };

    for (const auto& extra : extensions) {
        // Canonical start: equal magnitudes on T0, a smaller equal level on T \ T0.
        Vector h = Vector::Zero(p);
        for (int j : T0.indices()) h[j] = 1.0;
        for (int j : extra) h[j] = 0.5 * S / std::max<std::size_t>(extra.size(), 1);
        optimize_on(extra, h);
        for (int r = 0; r < per_set; ++r) {
            Vector g = sample_cone(layout, rng);
            for (int j : extra) g[j] = std::copysign(std::max(std::abs(g[j]), 1e-3), g[j]);
            optimize_on(extra, g);
        }
    }
    // Seeds run on the set T their own top-S pattern selects.
    for (const auto& seed : opts.seeds) {
        if (seed.size() != p || !seed.allFinite() || support_l1(T0, seed) <= 0.0) continue;
        std::vector<std::pair<double, int>> mags;
        for (int j : layout.Tc) mags.push_back({std::abs(seed[j]), j});
        std::sort(mags.begin(), mags.end(), std::greater<>());
        for (int size = 0; size <= S; ++size) {
            std::vector<int> extra;
            for (int k = 0; k < size; ++k) extra.push_back(mags[static_cast<std::size_t>(k)].second);
            std::sort(extra.begin(), extra.end());
            optimize_on(extra, seed);
        }
    }

    est.oracle_value = std::numeric_limits<double>::infinity();
    Vector oracle_h;
    Rng orng = make_rng(opts.seed, kOracleStream + 1);
    for (int i = 0; i < opts.oracle_samples; ++i) {
        const Vector h = sample_cone(layout, orng);
        const double r = phi_ratio(M, T0, h);
        if (r < est.oracle_value) {
            est.oracle_value = r;
            oracle_h = h;
        }
    }
    est.value = std::min(est.descent_value, est.oracle_value);
    if (est.oracle_value < est.descent_value) est.best_h = oracle_h;
    return est;
}

// =============================================================================
// Subset constants
// =============================================================================

namespace {

/// Calls f(subset) for every k-subset of `pool` in lexicographic order.
template <class F>
void for_each_subset(const std::vector<int>& pool, int k, F&& f) {
    const int n = static_cast<int>(pool.size());
    if (k > n) return;
    std::vector<int> pick(static_cast<std::size_t>(k));
    std::iota(pick.begin(), pick.end(), 0);
    std::vector<int> subset(static_cast<std::size_t>(k));
    while (true) {
        for (int i = 0; i < k; ++i) subset[static_cast<std::size_t>(i)] = pool[static_cast<std::size_t>(pick[static_cast<std::size_t>(i)])];
        f(subset);
        int i = k - 1;
        while (i >= 0 && pick[static_cast<std::size_t>(i)] == n - k + i) --i;
        if (i < 0) return;
        ++pick[static_cast<std::size_t>(i)];
        for (int l = i + 1; l < k; ++l) pick[static_cast<std::size_t>(l)] = pick[static_cast<std::size_t>(l - 1)] + 1;
    }
}

std::vector<int> random_subset(const std::vector<int>& pool, int k, Rng& rng) {
    std::vector<int> copy = pool;
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<int> pick(i, static_cast<int>(copy.size()) - 1);
        std::swap(copy[static_cast<std::size_t>(i)], copy[static_cast<std::size_t>(pick(rng))]);
    }
    copy.resize(static_cast<std::size_t>(k));
    std::sort(copy.begin(), copy.end());
    return copy;
}

Matrix submatrix(const Matrix& M, const std::vector<int>& rows, const std::vector<int>& cols) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < cols.size(); ++k)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = M(rows[i], cols[k]);
    return out;
}

double isometry_defect(const Matrix& M, const std::vector<int>& T) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(submatrix(M, T, T), Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    return std::max({ev.maxCoeff() - 1.0, 1.0 - ev.minCoeff(), 0.0});
}

double block_norm(const Matrix& M, const std::vector<int>& T, const std::vector<int>& U) {
    const Matrix B = submatrix(M, T, U);
    Eigen::JacobiSVD<Matrix> svd(B);
    return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

std::vector<int> iota_vec(int p) {
    std::vector<int> v(static_cast<std::size_t>(p));
    std::iota(v.begin(), v.end(), 0);
    return v;
}

std::string over_budget(long long total, long long budget) {
    std::ostringstream msg;
    msg << total << " subsets exceed the enumeration budget of " << budget
        << "; enable sampled mode to estimate from random subsets";
    return msg.str();
}

}  // namespace

SubsetConstant restricted_isometry(const Matrix& M, int N, const SubsetOptions& opts) {
    check_symmetric_psd(M);
    const int p = static_cast<int>(M.rows());
    if (N < 0 || N > p) throw ConfigError("restricted isometry needs 0 <= N <= p");
    SubsetConstant out;
    if (N == 0) return out;
    const auto pool = iota_vec(p);
    out.total = binomial(p, N);
    if (out.total <= opts.budget) {
        // Eigenvalue interlacing makes |T| = N the binding size.
        for_each_subset(pool, N, [&](const std::vector<int>& T) {
            out.value = std::max(out.value, isometry_defect(M, T));
            ++out.examined;
        });
        return out;
    }
    if (!opts.sampled) throw ConfigError(over_budget(out.total, opts.budget));
    out.exact = false;
    Rng rng = make_rng(opts.seed, 0x726970, static_cast<std::uint64_t>(N));
    for (long long k = 0; k < opts.samples; ++k) {
        out.value = std::max(out.value, isometry_defect(M, random_subset(pool, N, rng)));
        ++out.examined;
    }
    return out;
}

SubsetConstant restricted_orthogonality(const Matrix& M, int S1, int S2, const SubsetOptions& opts) {
    check_symmetric_psd(M);
    const int p = static_cast<int>(M.rows());
    if (S1 < 0 || S2 < 0 || S1 + S2 > p) throw ConfigError("restricted orthogonality needs S1 + S2 <= p");
    SubsetConstant out;
    if (S1 == 0 || S2 == 0) return out;
    const auto pool = iota_vec(p);
    const long long first = binomial(p, S1);
    const long long second = binomial(p - S1, S2);
    const long long cap = std::numeric_limits<long long>::max() / 4;
    out.total = (second != 0 && first > cap / second) ? cap : first * second;
    if (out.total <= opts.budget) {
        // Singular values interlace under deletion, so full-size blocks are binding.
        for_each_subset(pool, S1, [&](const std::vector<int>& T) {
            std::vector<int> rest;
            std::set_difference(pool.begin(), pool.end(), T.begin(), T.end(), std::back_inserter(rest));
            for_each_subset(rest, S2, [&](const std::vector<int>& U) {
                out.value = std::max(out.value, block_norm(M, T, U));
                ++out.examined;
            });
        });
        return out;
    }
    if (!opts.sampled) throw ConfigError(over_budget(out.total, opts.budget));
    out.exact = false;
    Rng rng = make_rng(opts.seed, 0x726f74, static_cast<std::uint64_t>(S1) * 1000003ULL + static_cast<std::uint64_t>(S2));
    for (long long k = 0; k < opts.samples; ++k) {
        const auto both = random_subset(pool, S1 + S2, rng);
        std::vector<int> shuffled = both;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        std::vector<int> T(shuffled.begin(), shuffled.begin() + S1);
        std::vector<int> U(shuffled.begin() + S1, shuffled.end());
        std::sort(T.begin(), T.end());
        std::sort(U.begin(), U.end());
        out.value = std::max(out.value, block_norm(M, T, U));
        ++out.examined;
    }
    return out;
}

double uup_margin(const Matrix& M, int S, const SubsetOptions& opts) {
    const int p = static_cast<int>(M.rows());
    if (S < 1 || 3 * S > p) throw ConfigError("UUP margin needs S >= 1 and 3S <= p");
    return 1.0 - restricted_isometry(M, 2 * S, opts).value - restricted_orthogonality(M, S, 2 * S, opts).value;
}

double sup_norm_diff(const Matrix& A, const Matrix& B) {
    if (A.rows() != B.rows() || A.cols() != B.cols())
        throw ConfigError("sup-norm difference needs matrices of equal dimensions");
    if (A.size() == 0) return 0.0;
    return (A - B).cwiseAbs().maxCoeff();
}

// =============================================================================
// Population surrogate
// =============================================================================

PopulationMatrix population_matrix(const SimConfig& config, const Vector& beta0, int n_big, int mc_reps) {
    if (n_big < 1000) throw ConfigError("population surrogate needs n_big >= 1000");
    if (mc_reps < 1) throw ConfigError("population surrogate needs mc_reps >= 1");
    SimConfig big = config;
    big.n = n_big;
    big.validate();
    if (beta0.size() != big.p) throw ConfigError("beta0 has the wrong length for the population surrogate");

    const int p = big.p;
    Matrix sum = Matrix::Zero(p, p);
    Matrix sum_sq = Matrix::Zero(p, p);
    for (int r = 0; r < mc_reps; ++r) {
        const SurvivalDataset data = simulate_replication(big, static_cast<std::uint64_t>(r), kPopulationStream);
        const Matrix J = evaluate(data, beta0).hessian;
        sum += J;
        sum_sq += J.cwiseProduct(J);
    }
    PopulationMatrix out;
    out.n_used = n_big;
    out.mc_reps = mc_reps;
    out.matrix = sum / mc_reps;
    if (mc_reps > 1) {
        const Matrix var = ((sum_sq - sum.cwiseProduct(sum) / mc_reps) / (mc_reps - 1)).cwiseMax(0.0);
        out.stderr_sup = std::sqrt(var.maxCoeff() / mc_reps);
    }
    return out;
}

// =============================================================================
// Report
// =============================================================================

FactorReport factor_report(const Matrix& M, const SupportSet& T0, const FactorReportOptions& opts) {
    check_inputs(M, T0);
    const int p = static_cast<int>(M.rows());
    const int S = T0.size();
    FactorReport rep;
    rep.q_max = opts.q_max;

    rep.kappa = compatibility_factor(M, T0, opts.factor);
    FactorOptions shared = opts.factor;
    shared.seeds.push_back(rep.kappa.best_h);

    rep.re = restricted_eigenvalue(M, T0, shared);
    shared.seeds.push_back(rep.re.best_h);

    std::vector<double> qs = opts.q_values;
    qs.push_back(opts.q_max);
    for (double q : qs) {
        auto f = weak_cone_invertibility_factor(M, T0, q, shared);
        rep.f_q.emplace(q, std::move(f));
    }
    if (opts.include_phi && 2 * S <= p) {
        try {
            rep.phi_2s = phi_2s(M, T0, shared);
        } catch (const ConfigError&) {
            // Too many supersets to enumerate: left unreported.
        }
    }

    for (int N = 1; N <= std::min(2 * S, p); ++N) {
        try {
            rep.delta.emplace(N, restricted_isometry(M, N, opts.subsets));
        } catch (const ConfigError&) {
            break;
        }
    }
    if (opts.include_uup && 3 * S <= p) {
        try {
            rep.theta.emplace(std::make_pair(S, S), restricted_orthogonality(M, S, S, opts.subsets));
            auto theta = restricted_orthogonality(M, S, 2 * S, opts.subsets);
            const auto delta = rep.delta.count(2 * S) ? rep.delta.at(2 * S) : restricted_isometry(M, 2 * S, opts.subsets);
            rep.uup_margin = 1.0 - delta.value - theta.value;
            rep.theta.emplace(std::make_pair(S, 2 * S), std::move(theta));
        } catch (const ConfigError&) {
            // Over budget without sampled mode: margin left unreported.
        }
    }
    return rep;
}

void to_json(nlohmann::json& j, const FactorEstimate& f) {
    j = nlohmann::json{{"value", f.value},
                       {"descent_value", f.descent_value},
                       {"oracle_value", f.oracle_value},
                       {"oracle_gap", f.oracle_gap()},
                       {"restarts", f.restarts},
                       {"best_h", vector_to_json(f.best_h)}};
}

void to_json(nlohmann::json& j, const SubsetConstant& c) {
    j = nlohmann::json{{"value", c.value}, {"examined", c.examined}, {"total", c.total}, {"exact", c.exact},
                       {"coverage", c.coverage()}};
}

void to_json(nlohmann::json& j, const FactorReport& r) {
    j = nlohmann::json::object();
    j["kappa"] = r.kappa;
    j["re"] = r.re;
    nlohmann::json fq = nlohmann::json::object();
    for (const auto& [q, f] : r.f_q) {
        nlohmann::json entry = f;
        entry["q"] = q;
        entry["infinity_surrogate"] = (q == r.q_max);
        fq[format_double(q)] = std::move(entry);
    }
    j["f_q"] = std::move(fq);
    j["phi_2s"] = r.phi_2s ? nlohmann::json(*r.phi_2s) : nlohmann::json(nullptr);
    nlohmann::json delta = nlohmann::json::object();
    for (const auto& [N, c] : r.delta) delta[std::to_string(N)] = c;
    j["delta"] = std::move(delta);
    nlohmann::json theta = nlohmann::json::object();
    for (const auto& [key, c] : r.theta) theta[std::to_string(key.first) + "," + std::to_string(key.second)] = c;
    j["theta"] = std::move(theta);
    j["uup_margin"] = r.uup_margin ? nlohmann::json(*r.uup_margin) : nlohmann::json(nullptr);
}

void to_json(nlohmann::json& j, const PopulationMatrix& m) {
    j = nlohmann::json{{"matrix", matrix_to_json(m.matrix)},
                       {"n_used", m.n_used},
                       {"mc_reps", m.mc_reps},
                       {"stderr_sup", m.stderr_sup}};
}

}  // namespace hazard_dantzig
