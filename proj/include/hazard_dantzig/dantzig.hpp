#pragma once

#include "hazard_dantzig/common.hpp"
#include "hazard_dantzig/partial_likelihood.hpp"
#include "hazard_dantzig/simplex.hpp"
#include "hazard_dantzig/survival_sim.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace hazard_dantzig {

/// gamma_{n,p} = K2 log(1 + p) / n^alpha, with 0 < alpha <= 1/2.
double gamma_schedule(int n, int p, double K2, double alpha);

struct L1Solution {
    Vector beta;
    LpSolution lp;
};

/**
 * min ||beta||_1  subject to  ||r - G beta||_inf <= gamma.
 *
 * Solved as an LP in (beta+, beta-) >= 0 with 2p inequality rows. Throws
 * ComputeError("infeasible at gamma ...") when the constraint set is empty.
 */
L1Solution l1_min_under_linf(const Matrix& G, const Vector& r, double gamma, const SimplexOptions& lp = {});

enum class FitStatus { Converged, MaxIters, Infeasible };

std::string to_string(FitStatus status);

struct SolverConfig {
    double gamma = 0.0;
    int max_outer = 50;
    double outer_tol = 1e-6;       // on ||beta^{k+1} - beta^k||_inf
    double lp_tol = 1e-8;          // duality-gap certificate per inner solve
    double feasibility_slack = 1e-6;
    std::optional<Vector> warm_start;  // empty: start from zero

    void validate() const;
};

struct TraceEntry {
    double objective;   // ||beta^k||_1
    double constraint;  // ||U_n(beta^k)||_inf
    double step;        // ||beta^k - beta^{k-1}||_inf
    double duality_gap;
};

struct EstimateResult {
    Vector beta_hat;
    double gamma = 0.0;
    int outer_iters = 0;
    double objective = 0.0;         // ||beta_hat||_1
    double constraint_value = 0.0;  // ||U_n(beta_hat)||_inf
    double max_duality_gap = 0.0;   // worst inner certificate over the run
    std::vector<TraceEntry> trace;
    FitStatus status = FitStatus::Infeasible;
    std::string message;
};

/**
 * Dantzig selector under the Cox partial-likelihood score.
 *
 * Sequential linearization: at beta^k the constraint ||U_n(beta)||_inf <= gamma
 * is replaced by ||r - G beta||_inf <= gamma with G = J_n(beta^k) and
 * r = U_n(beta^k) + J_n(beta^k) beta^k, and the resulting LP is solved
 * exactly. The returned status is certified against the nonlinear constraint.
 */
EstimateResult solve_dsfph(const SurvivalDataset& data, const SolverConfig& config);

struct GridFit {
    std::vector<EstimateResult> fits;
    bool objective_monotone = true;  // ||beta_hat||_1 non-increasing in gamma (diagnostic only)
};

/// Warm-started sweep over a descending gamma grid; per-point failures are recorded, not thrown.
GridFit gamma_grid_fit(const SurvivalDataset& data, const std::vector<double>& gammas, const SolverConfig& config);

void to_json(nlohmann::json& j, const EstimateResult& result);

}  // namespace hazard_dantzig
