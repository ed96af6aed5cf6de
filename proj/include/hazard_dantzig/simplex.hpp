#pragma once

#include "hazard_dantzig/common.hpp"

#include <string>
#include <vector>

namespace hazard_dantzig {

/// min c'x  subject to  A x <= b,  x >= 0
struct LpProblem {
    Matrix A;
    Vector b;
    Vector c;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

std::string to_string(LpStatus status);

struct SimplexOptions {
    double pivot_tol = 1e-9;    // smallest admissible pivot magnitude
    double cost_tol = 1e-11;    // reduced-cost threshold for entering
    double feasibility_tol = 1e-9;
    int max_pivots = 200000;
};

/**
 * Result with an optimality certificate recomputed from the final basis:
 * x_B = B^{-1} b and y = B^{-T} c_B, so that primal/dual residuals and the
 * gap |c'x - b'y| are measured on the original data, not on the tableau.
 */
struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    Vector x;
    Vector dual;  // y <= 0 for the "<=" rows of a minimization
    double objective = 0.0;
    double dual_objective = 0.0;
    double duality_gap = 0.0;
    double primal_residual = 0.0;  // max violation of Ax <= b and x >= 0
    double dual_residual = 0.0;    // max violation of A'y <= c and y <= 0
    int pivots = 0;
    std::vector<int> basis;
};

/// Dense two-phase tableau simplex using Bland's rule for entering and leaving variables.
LpSolution solve_lp(const LpProblem& problem, const SimplexOptions& options = {});

}  // namespace hazard_dantzig
