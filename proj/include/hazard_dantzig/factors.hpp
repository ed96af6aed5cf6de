#pragma once

#include "hazard_dantzig/common.hpp"
#include "hazard_dantzig/survival_sim.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace hazard_dantzig {

/// Sorted, duplicate-free, 0-based coordinate set (the support T_0 of beta_0).
class SupportSet {
public:
    SupportSet() = default;
    explicit SupportSet(std::vector<int> indices);
    static SupportSet first(int s);
    static SupportSet from_one_based(const std::vector<int>& indices);

    const std::vector<int>& indices() const { return indices_; }
    int size() const { return static_cast<int>(indices_.size()); }
    bool contains(int j) const;
    /// Throws ConfigError unless nonempty with every index in [0, p).
    void validate(int p) const;
    /// Complement within {0, ..., p-1}.
    std::vector<int> complement(int p) const;

private:
    std::vector<int> indices_;
};

struct FactorOptions {
    int restarts = 64;
    int oracle_samples = 100000;
    int max_iters = 4000;
    double tol = 1e-12;
    std::uint64_t seed = 0x5eedf00d;
    /// Extra starting directions (any scale, any sign); typically minimizers of sibling factors.
    std::vector<Vector> seeds;
};

/**
 * Value of one cone-restricted infimum together with how it was obtained.
 * Every number here is an upper bound on the true infimum: both routes only
 * ever evaluate the objective at admissible directions.
 */
struct FactorEstimate {
    double value = 0.0;          // min(descent_value, oracle_value)
    double descent_value = 0.0;  // best projected-gradient result
    double oracle_value = 0.0;   // best dense-sampling result
    int restarts = 0;
    Vector best_h;

    double oracle_gap() const { return oracle_value - descent_value; }
};

/// kappa(T0; M) = inf_{h in C_T0} sqrt(S) (h'Mh)^{1/2} / ||h_T0||_1
FactorEstimate compatibility_factor(const Matrix& M, const SupportSet& T0, const FactorOptions& opts = {});

/// F_q(T0; M) = inf_{h in C_T0} S^{1/q} h'Mh / (||h_T0||_1 ||h||_q),  q >= 1
FactorEstimate weak_cone_invertibility_factor(const Matrix& M, const SupportSet& T0, double q,
                                              const FactorOptions& opts = {});

/// RE(T0; M) = inf_{h in C_T0} (h'Mh)^{1/2} / ||h||_2
FactorEstimate restricted_eigenvalue(const Matrix& M, const SupportSet& T0, const FactorOptions& opts = {});

/// phi_2S(T0; M) = inf over T >= T0, |T| <= 2S, h in D_{T0,T} of (h'Mh)^{1/2} / ||h_T||_2
FactorEstimate phi_2s(const Matrix& M, const SupportSet& T0, const FactorOptions& opts = {});

// Direct evaluation of each ratio at one direction (used by oracles and tests).
double compatibility_ratio(const Matrix& M, const SupportSet& T0, const Vector& h);
double weak_cone_ratio(const Matrix& M, const SupportSet& T0, double q, const Vector& h);
double restricted_eigen_ratio(const Matrix& M, const Vector& h);
/// (h'Mh)^{1/2} / ||h_T||_2 with T = T0 plus the S largest |h_j| outside T0.
double phi_ratio(const Matrix& M, const SupportSet& T0, const Vector& h);
bool in_cone(const SupportSet& T0, const Vector& h, double tol = 0.0);

struct SubsetOptions {
    long long budget = 1000000;  // max subsets enumerated exactly
    bool sampled = false;        // fall back to random subsets when over budget
    long long samples = 100000;
    std::uint64_t seed = 0x5eedf00d;
};

struct SubsetConstant {
    double value = 0.0;
    long long examined = 0;
    long long total = 0;
    bool exact = true;

    double coverage() const { return total == 0 ? 1.0 : static_cast<double>(examined) / static_cast<double>(total); }
};

/// delta_N: max over |T| = N of max(lambda_max(M_TT) - 1, 1 - lambda_min(M_TT)), clamped at 0.
SubsetConstant restricted_isometry(const Matrix& M, int N, const SubsetOptions& opts = {});

/// theta_{S1,S2}: max over disjoint |T| = S1, |T'| = S2 of sigma_max(M_{T,T'}).
SubsetConstant restricted_orthogonality(const Matrix& M, int S1, int S2, const SubsetOptions& opts = {});

/// 1 - delta_2S - theta_{S,2S}; requires 3S <= p.
double uup_margin(const Matrix& M, int S, const SubsetOptions& opts = {});

/// Entrywise max |A - B|.
double sup_norm_diff(const Matrix& A, const Matrix& B);

/// Monte Carlo surrogate for the deterministic information matrix at beta_0.
struct PopulationMatrix {
    Matrix matrix;
    int n_used = 0;
    int mc_reps = 0;
    double stderr_sup = 0.0;  // max entrywise standard error of the replicate mean
};

/// Replication stream used by `population_matrix` (exposed so tests can regenerate a replicate).
inline constexpr std::uint64_t kPopulationStream = 0x706f70;  // "pop"

/// Average of J_n(beta0) over `mc_reps` simulated datasets of size `n_big` (>= 1000).
PopulationMatrix population_matrix(const SimConfig& config, const Vector& beta0, int n_big, int mc_reps);

/// Throws ConfigError unless M is square, finite, symmetric and PSD to tolerance.
void check_symmetric_psd(const Matrix& M);

struct FactorReportOptions {
    FactorOptions factor;
    SubsetOptions subsets;
    std::vector<double> q_values{1.0, 2.0, 4.0};
    double q_max = 64.0;  // stands in for q = infinity
    bool include_phi = true;
    bool include_uup = true;
};

struct FactorReport {
    FactorEstimate kappa;
    std::map<double, FactorEstimate> f_q;
    FactorEstimate re;
    std::optional<FactorEstimate> phi_2s;
    std::map<int, SubsetConstant> delta;
    std::map<std::pair<int, int>, SubsetConstant> theta;
    std::optional<double> uup_margin;
    double q_max = 64.0;
};

/// All factors for one matrix and support; sibling minimizers are shared as extra restarts.
FactorReport factor_report(const Matrix& M, const SupportSet& T0, const FactorReportOptions& opts = {});

void to_json(nlohmann::json& j, const FactorEstimate& f);
void to_json(nlohmann::json& j, const SubsetConstant& c);
void to_json(nlohmann::json& j, const FactorReport& r);
void to_json(nlohmann::json& j, const PopulationMatrix& m);

}  // namespace hazard_dantzig
