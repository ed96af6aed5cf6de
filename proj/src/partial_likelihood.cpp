#include "hazard_dantzig/partial_likelihood.hpp"

#include "hazard_dantzig/json_util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hazard_dantzig {

namespace {

void check_beta(const SurvivalDataset& data, const Vector& beta) {
    if (beta.size() != data.p())
        throw ConfigError("beta has length " + std::to_string(beta.size()) + ", dataset has p = " +
                          std::to_string(data.p()));
    if (!beta.allFinite()) throw ConfigError("beta must be finite");
}

/// Subjects sorted by decreasing follow-up time; ties by increasing index.
std::vector<int> descending_time_order(const SurvivalDataset& data) {
    std::vector<int> order(static_cast<std::size_t>(data.n()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return data.time[a] > data.time[b] || (data.time[a] == data.time[b] && a < b);
    });
    return order;
}

template <bool WithHessian>
ScoreHessian accumulate(const SurvivalDataset& data, const Vector& beta) {
    check_beta(data, beta);
    const int n = data.n();
    const int p = data.p();

    const Eigen::RowVectorXd center = data.covariates.colwise().mean();
    const Vector eta = data.covariates * beta;

    ScoreHessian out;
    out.score = Vector::Zero(p);
    if constexpr (WithHessian) out.hessian = Matrix::Zero(p, p);

    // Running sums over the current risk set, scaled by exp(-shift).
    double shift = -std::numeric_limits<double>::infinity();
    double w0 = 0.0;
    Vector w1 = Vector::Zero(p);
    Matrix w2;
    if constexpr (WithHessian) w2 = Matrix::Zero(p, p);

    const auto order = descending_time_order(data);
    Vector zc(p);
    Vector mean(p);
    std::size_t k = 0;
    while (k < order.size()) {
        // Admit every subject tied at this time before scoring its events.
        const double t = data.time[order[k]];
        std::size_t end = k;
        while (end < order.size() && data.time[order[end]] == t) {
            const int i = order[end];
            if (eta[i] > shift) {
                const double rescale = std::isfinite(shift) ? std::exp(shift - eta[i]) : 0.0;
                w0 *= rescale;
                w1 *= rescale;
                if constexpr (WithHessian) w2 *= rescale;
                shift = eta[i];
            }
            const double w = std::exp(eta[i] - shift);
            zc = (data.covariates.row(i) - center).transpose();
            w0 += w;
            w1.noalias() += w * zc;
            if constexpr (WithHessian) w2.selfadjointView<Eigen::Lower>().rankUpdate(zc, w);
            ++end;
        }

        std::vector<int> tied;
        for (std::size_t m = k; m < end; ++m)
            if (data.status[static_cast<std::size_t>(order[m])] == 1) tied.push_back(order[m]);
        std::sort(tied.begin(), tied.end());
        if (!tied.empty()) {
            mean = w1 / w0;
            const double log_s0 = shift + std::log(w0);
            for (int i : tied) {
                out.loglik += eta[i] - log_s0;
                out.score += (data.covariates.row(i) - center).transpose() - mean;
            }
            if constexpr (WithHessian) {
                const double count = static_cast<double>(tied.size());
                out.hessian.template triangularView<Eigen::Lower>() +=
                    count * (w2 / w0 - mean * mean.transpose());
            }
        }
        k = end;
    }

    out.loglik /= n;
    out.score /= n;
    if constexpr (WithHessian) {
        out.hessian /= n;
        out.hessian = out.hessian.template selfadjointView<Eigen::Lower>();
    }
    return out;
}

}  // namespace

LikelihoodSnapshot snapshot(const SurvivalDataset& data, const Vector& beta, double t) {
    check_beta(data, beta);
    LikelihoodSnapshot snap;
    snap.at_time = t;
    snap.s1 = Vector::Zero(data.p());
    snap.s2 = Matrix::Zero(data.p(), data.p());
    bool any = false;
    for (int i = 0; i < data.n(); ++i) {
        if (data.time[i] < t) continue;
        any = true;
        const Vector z = data.covariates.row(i).transpose();
        const double w = std::exp(z.dot(beta));
        snap.s0 += w;
        snap.s1 += w * z;
        snap.s2 += w * z * z.transpose();
    }
    if (!any) throw ComputeError("empty risk set at t = " + std::to_string(t));
    return snap;
}

ScoreHessian evaluate(const SurvivalDataset& data, const Vector& beta) {
    return accumulate<true>(data, beta);
}

ScoreHessian evaluate_score(const SurvivalDataset& data, const Vector& beta) {
    return accumulate<false>(data, beta);
}

double covariate_spread(const SurvivalDataset& data, const Vector& h) {
    if (h.size() != data.p()) throw ConfigError("direction h has wrong length");
    const Vector proj = data.covariates * h;
    return proj.maxCoeff() - proj.minCoeff();
}

SandwichTerms sandwich_check(const SurvivalDataset& data, const Vector& beta, const Vector& h) {
    SandwichTerms out;
    if (h.size() != data.p()) throw ConfigError("direction h has wrong length");
    if (!h.allFinite()) throw ConfigError("direction h must be finite");
    if (h.isZero(0.0)) return out;

    const ScoreHessian at = evaluate(data, beta);
    const ScoreHessian moved = evaluate_score(data, beta + h);
    const double quad = h.dot(at.hessian * h);
    out.eta = covariate_spread(data, h);
    out.lower = std::exp(-out.eta) * quad;
    out.upper = std::exp(out.eta) * quad;
    out.middle = std::abs(h.dot(moved.score - at.score));
    return out;
}

void to_json(nlohmann::json& j, const ScoreHessian& sh) {
    j = nlohmann::json{{"loglik", sh.loglik}, {"score", vector_to_json(sh.score)}};
    if (sh.hessian.size() > 0) j["hessian"] = matrix_to_json(sh.hessian);
}

}  // namespace hazard_dantzig
