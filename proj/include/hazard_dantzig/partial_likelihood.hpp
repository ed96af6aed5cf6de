#pragma once

#include "hazard_dantzig/common.hpp"
#include "hazard_dantzig/survival_sim.hpp"

#include <json.hpp>

namespace hazard_dantzig {

/// Risk-set moments S^0, S^1, S^2 at one time point (unnormalized sums).
struct LikelihoodSnapshot {
    double s0 = 0.0;
    Vector s1;
    Matrix s2;
    double at_time = 0.0;
};

/**
 * Log partial likelihood l_n, score U_n = grad l_n and observed information
 * J_n = -hess l_n, all normalized by 1/n.
 */
struct ScoreHessian {
    double loglik = 0.0;
    Vector score;
    Matrix hessian;
};

/// Exact risk-set sums over {i : X_i >= t}. Throws ComputeError on an empty risk set.
LikelihoodSnapshot snapshot(const SurvivalDataset& data, const Vector& beta, double t);

/**
 * One pass over the event times computing (l_n, U_n, J_n).
 *
 * Covariates are centered by their column means (all three quantities are
 * invariant to a common shift) and exponential weights use a running
 * log-sum-exp shift, so large ||beta|| does not overflow. Tied event times
 * share the full risk set {X_i >= t}.
 */
ScoreHessian evaluate(const SurvivalDataset& data, const Vector& beta);

/// l_n and U_n only; O(n p) instead of O(n p^2).
ScoreHessian evaluate_score(const SurvivalDataset& data, const Vector& beta);

struct SandwichTerms {
    double lower = 0.0;   // e^{-eta} h'J(beta)h
    double middle = 0.0;  // |h'[U(beta + h) - U(beta)]|
    double upper = 0.0;   // e^{eta} h'J(beta)h
    double eta = 0.0;     // max_{i,j} |h'Z_i - h'Z_j|
};

/// Both sides of the score-difference sandwich inequality for direction h.
SandwichTerms sandwich_check(const SurvivalDataset& data, const Vector& beta, const Vector& h);

/// max_{i,j} |h'Z_i - h'Z_j|
double covariate_spread(const SurvivalDataset& data, const Vector& h);

void to_json(nlohmann::json& j, const ScoreHessian& sh);

}  // namespace hazard_dantzig
