#pragma once

#include "hazard_dantzig/common.hpp"
#include "hazard_dantzig/dantzig.hpp"
#include "hazard_dantzig/factors.hpp"
#include "hazard_dantzig/survival_sim.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace hazard_dantzig {

// =============================================================================
// Constants and closed-form bounds
// =============================================================================

struct TruthConstants {
    double K3 = 0.0;
    double K4 = 0.0;
    double K5 = 0.0;
    double baseline_integral = 0.0;  // int_0^tau alpha_0
    double beta0_l1 = 0.0;
};

/**
 * K3 = 4 K1^2 exp(K1 ||beta0||_1) int_0^tau alpha_0,
 * K4 = 4 ||beta0||_1 exp(4 K1 ||beta0||_1),
 * K5 = 2 exp(4 K1 ||beta0||_1).
 * The baseline and tau come from `config`; K1 and beta0 are passed explicitly.
 */
TruthConstants constants_from_truth(const Vector& beta0, double K1, const SimConfig& config);

struct TailBound {
    double single = 2.0;       // one coordinate: 2 exp(-g^2 / (2 (2 K1 g / n + K3 / n)))
    double union_bound = 1.0;  // min(1, p * single) for the sup-norm event
};

TailBound tail_bound(double gamma, int n, double K1, double K3, int p = 1);

/// K4 gamma / (RE^2 - eps); nullopt (vacuous) unless RE^2 > eps.
std::optional<double> theorem44_bound(double K4, double gamma, double re, double eps_n);

struct Theorem45Bounds {
    std::optional<double> l1;  // 4 K5 S gamma / (kappa^2 - 4 S eps)
    std::optional<double> lq;  // (2 S^{1/q} eps / F_q)(2 K5 S gamma / (kappa^2 - 2 S eps)) + 2 K5 S^{1/q} gamma / F_q
};

/// Requires q > 1. The l_q bound is also vacuous when F_q = 0.
Theorem45Bounds theorem45_bounds(double K5, int S, double gamma, double kappa, double f_q, double q, double eps_n);

// =============================================================================
// Monte Carlo tail of the score at the truth
// =============================================================================

struct TailEstimate {
    int reps = 0;
    int exceed = 0;
    double probability = 0.0;
    double lower = 0.0;  // Wilson 95% interval
    double upper = 0.0;

    double half_width() const { return 0.5 * (upper - lower); }
};

/// Wilson score interval for `successes` out of `trials` at 95%.
TailEstimate binomial_estimate(int successes, int trials);

inline constexpr std::uint64_t kTailStream = 0x7461696c;  // "tail"

/// ||U_n(beta0)||_inf on `reps` replications drawn from stream `stream`.
std::vector<double> score_sup_norms(const SimConfig& config, int reps, std::uint64_t stream = kTailStream,
                                    int jobs = 1);

/// Fraction of replications with ||U_n(beta0)||_inf >= gamma. Requires reps >= 100.
TailEstimate mc_score_tail(const SimConfig& config, double gamma, int reps, std::uint64_t stream = kTailStream,
                           int jobs = 1);

/// Fraction of precomputed norms at or above gamma.
TailEstimate tail_from_norms(const std::vector<double>& norms, double gamma);

// =============================================================================
// Experiment
// =============================================================================

struct ExperimentConfig {
    SimConfig sim;  // sim.n is ignored; the grid supplies n
    std::vector<int> n_grid{200, 400, 800};
    int reps = 20;
    std::optional<double> K2;  // empty: calibrate at n_grid.front()
    double alpha = 0.5;
    double calibration_coverage = 0.95;
    int calibration_reps = 200;
    int population_n = 20000;
    int population_reps = 4;
    double q = 2.0;
    FactorOptions factor;
    SolverConfig solver;  // gamma is overwritten per n

    void validate() const;
};

struct ReplicationRecord {
    int n = 0;
    int rep = 0;
    double gamma = 0.0;
    bool ok = false;
    std::string error;
    std::string status;
    int outer_iters = 0;
    double l1_error = 0.0;
    double l2_error = 0.0;
    double lq_error = 0.0;
    double beta_hat_l1 = 0.0;
    double score_at_beta0 = 0.0;  // ||U_n(beta0)||_inf
    bool beta0_feasible = false;
    double eps_n = 0.0;
    bool l1_not_above_truth = false;  // ||beta_hat||_1 <= ||beta0||_1 + tol
    bool cone_member = false;
    double proof_lhs = 0.0;  // h'J_n(beta0)h
    double proof_rhs = 0.0;  // e^{eta_h} (2 gamma + slack) ||h||_1
    bool proof_holds = false;
    std::optional<double> thm44;
    std::optional<double> thm45_l1;
    std::optional<double> thm45_lq;
};

struct BoundTally {
    int eligible = 0;
    int satisfied = 0;

    double rate() const { return eligible == 0 ? 1.0 : static_cast<double>(satisfied) / eligible; }
};

struct GridSummary {
    int n = 0;
    double gamma = 0.0;
    int reps = 0;
    int failed = 0;
    int feasible = 0;
    double median_l1_error = 0.0;
    double median_l2_error = 0.0;
    double median_eps_n = 0.0;
    int norm_violations = 0;
    int cone_violations = 0;
    int proof_violations = 0;
    BoundTally thm44;
    BoundTally thm45_l1;
    BoundTally thm45_lq;
};

struct ExperimentReport {
    ExperimentConfig config;
    double K2 = 0.0;
    bool K2_calibrated = false;
    TruthConstants constants;
    PopulationMatrix population;
    FactorEstimate kappa;
    FactorEstimate re;
    FactorEstimate f_q;
    std::vector<ReplicationRecord> records;  // ordered by (n, rep)
    std::vector<GridSummary> summaries;      // one per n, grid order
    int failed = 0;
    bool ok = true;  // false when more than 10% of replications errored
};

inline constexpr std::uint64_t kCalibrationStream = 0x63616c;  // "cal"

/// Empirical K2 such that gamma_schedule(n, p, K2, alpha) covers ||U_n(beta0)||_inf with the given probability.
double calibrate_K2(const SimConfig& config, int n, double alpha, double coverage, int reps, int jobs = 1);

ExperimentReport run_experiment(const ExperimentConfig& config, int jobs = 1);

std::string experiment_csv(const ExperimentReport& report);

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
void to_json(nlohmann::json& j, const TailEstimate& t);
void to_json(nlohmann::json& j, const ExperimentReport& r);

}  // namespace hazard_dantzig
