#include "hazard_dantzig/dantzig.hpp"

#include "hazard_dantzig/json_util.hpp"

#include <cmath>
#include <sstream>

namespace hazard_dantzig {

double gamma_schedule(int n, int p, double K2, double alpha) {
    if (n < 1) throw ConfigError("gamma schedule needs n >= 1");
    if (p < 1) throw ConfigError("gamma schedule needs p >= 1");
    if (!(K2 > 0.0) || !std::isfinite(K2)) throw ConfigError("gamma schedule needs K2 > 0");
    if (!(alpha > 0.0 && alpha <= 0.5))
        throw ConfigError("gamma schedule exponent alpha must lie in (0, 1/2]");
    return K2 * std::log1p(static_cast<double>(p)) / std::pow(static_cast<double>(n), alpha);
}

L1Solution l1_min_under_linf(const Matrix& G, const Vector& r, double gamma, const SimplexOptions& options) {
    const auto p = G.rows();
    if (G.cols() != p) throw ConfigError("G must be square");
    if (r.size() != p) throw ConfigError("r must have length p");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be finite and >= 0");

    // x = [beta+; beta-]:  G(b+ - b-) <= r + gamma,  -G(b+ - b-) <= gamma - r.
    LpProblem lp;
    lp.A.resize(2 * p, 2 * p);
    lp.A.topLeftCorner(p, p) = G;
    lp.A.topRightCorner(p, p) = -G;
    lp.A.bottomLeftCorner(p, p) = -G;
    lp.A.bottomRightCorner(p, p) = G;
    lp.b.resize(2 * p);
    lp.b.head(p) = r.array() + gamma;
    lp.b.tail(p) = gamma - r.array();
    lp.c = Vector::Ones(2 * p);

    L1Solution out;
    out.lp = solve_lp(lp, options);
    if (out.lp.status == LpStatus::Infeasible) {
        std::ostringstream msg;
        msg << "infeasible at gamma = " << gamma;
        throw ComputeError(msg.str());
    }
    if (out.lp.status != LpStatus::Optimal)
        throw ComputeError("inner LP did not reach optimality: " + to_string(out.lp.status));
    out.beta = out.lp.x.head(p) - out.lp.x.tail(p);
    return out;
}

std::string to_string(FitStatus status) {
    switch (status) {
        case FitStatus::Converged: return "converged";
        case FitStatus::MaxIters: return "max_iters";
        case FitStatus::Infeasible: return "infeasible";
    }
    return "unknown";
}

void SolverConfig::validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be finite and >= 0");
    if (max_outer < 1) throw ConfigError("max_outer must be >= 1");
    if (!(outer_tol > 0.0)) throw ConfigError("outer_tol must be > 0");
    if (!(lp_tol > 0.0)) throw ConfigError("lp_tol must be > 0");
    if (!(feasibility_slack > 0.0)) throw ConfigError("feasibility_slack must be > 0");
    if (warm_start && !warm_start->allFinite()) throw ConfigError("warm start must be finite");
}

namespace {

struct LoopOutcome {
    Vector beta;
    bool step_converged = false;
    int iterations = 0;
    double max_gap = 0.0;
    std::vector<TraceEntry> trace;
    ScoreHessian at_beta;
};

LoopOutcome linearization_loop(const SurvivalDataset& data, const SolverConfig& config, Vector beta) {
    LoopOutcome out;
    out.at_beta = evaluate(data, beta);
    for (int k = 0; k < config.max_outer; ++k) {
        const Matrix& G = out.at_beta.hessian;
        const Vector r = out.at_beta.score + G * beta;
        const L1Solution inner = l1_min_under_linf(G, r, config.gamma);
        if (inner.lp.duality_gap > config.lp_tol)
            throw ComputeError("inner LP duality gap " + std::to_string(inner.lp.duality_gap) + " exceeds lp_tol");

        const double step = linf_norm(inner.beta - beta);
        beta = inner.beta;
        out.at_beta = evaluate(data, beta);
        out.iterations = k + 1;
        out.max_gap = std::max(out.max_gap, inner.lp.duality_gap);
        out.trace.push_back({l1_norm(beta), linf_norm(out.at_beta.score), step, inner.lp.duality_gap});
        if (step <= config.outer_tol) {
            out.step_converged = true;
            break;
        }
    }
    out.beta = std::move(beta);
    return out;
}

}  // namespace

EstimateResult solve_dsfph(const SurvivalDataset& data, const SolverConfig& config) {
    config.validate();
    data.validate();
    if (config.warm_start && config.warm_start->size() != data.p())
        throw ConfigError("warm start has the wrong length");

    EstimateResult result;
    result.gamma = config.gamma;
    const Vector start = config.warm_start ? *config.warm_start : Vector::Zero(data.p());

    LoopOutcome loop;
    try {
        loop = linearization_loop(data, config, start);
    } catch (const ComputeError& first) {
        try {
            loop = linearization_loop(data, config, Vector::Zero(data.p()));
            result.message = std::string("restarted from zero after: ") + first.what();
        } catch (const ComputeError& second) {
            result.beta_hat = start;
            result.status = FitStatus::Infeasible;
            result.message = second.what();
            const ScoreHessian at = evaluate_score(data, start);
            result.objective = l1_norm(start);
            result.constraint_value = linf_norm(at.score);
            return result;
        }
    }

    result.beta_hat = loop.beta;
    result.outer_iters = loop.iterations;
    result.trace = std::move(loop.trace);
    result.max_duality_gap = loop.max_gap;
    result.objective = l1_norm(loop.beta);
    result.constraint_value = linf_norm(loop.at_beta.score);
    if (result.constraint_value > config.gamma + config.feasibility_slack) {
        result.status = FitStatus::Infeasible;
        if (result.message.empty()) result.message = "final iterate violates the score constraint";
    } else {
        result.status = loop.step_converged ? FitStatus::Converged : FitStatus::MaxIters;
    }
    return result;
}

GridFit gamma_grid_fit(const SurvivalDataset& data, const std::vector<double>& gammas, const SolverConfig& config) {
    if (gammas.empty()) throw ConfigError("gamma grid must be nonempty");
    for (std::size_t k = 1; k < gammas.size(); ++k)
        if (gammas[k] > gammas[k - 1]) throw ConfigError("gamma grid must be sorted in descending order");

    GridFit grid;
    SolverConfig point = config;
    for (double g : gammas) {
        point.gamma = g;
        EstimateResult fit;
        try {
            fit = solve_dsfph(data, point);
        } catch (const std::exception& e) {
            fit.gamma = g;
            fit.status = FitStatus::Infeasible;
            fit.message = e.what();
            fit.beta_hat = point.warm_start ? *point.warm_start : Vector::Zero(data.p());
        }
        if (fit.status != FitStatus::Infeasible) point.warm_start = fit.beta_hat;
        if (!grid.fits.empty() && fit.objective + 1e-9 < grid.fits.back().objective &&
            fit.status != FitStatus::Infeasible)
            grid.objective_monotone = false;
        grid.fits.push_back(std::move(fit));
    }
    return grid;
}

void to_json(nlohmann::json& j, const EstimateResult& r) {
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& t : r.trace)
        trace.push_back({{"objective", t.objective},
                         {"constraint", t.constraint},
                         {"step", t.step},
                         {"duality_gap", t.duality_gap}});
    j = nlohmann::json{{"beta_hat", vector_to_json(r.beta_hat)},
                       {"gamma", r.gamma},
                       {"outer_iters", r.outer_iters},
                       {"objective", r.objective},
                       {"constraint_value", r.constraint_value},
                       {"max_duality_gap", r.max_duality_gap},
                       {"status", to_string(r.status)},
                       {"trace", std::move(trace)}};
    if (!r.message.empty()) j["message"] = r.message;
}

}  // namespace hazard_dantzig
