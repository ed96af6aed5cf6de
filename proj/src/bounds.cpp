#include "hazard_dantzig/bounds.hpp"

#include "hazard_dantzig/json_util.hpp"
#include "hazard_dantzig/parallel.hpp"
#include "hazard_dantzig/partial_likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hazard_dantzig {

TruthConstants constants_from_truth(const Vector& beta0, double K1, const SimConfig& config) {
    if (!(K1 > 0.0)) throw ConfigError("K1 must be positive");
    TruthConstants c;
    c.beta0_l1 = l1_norm(beta0);
    c.baseline_integral = cumulative_baseline(config.baseline, config.tau);
    c.K3 = 4.0 * K1 * K1 * std::exp(K1 * c.beta0_l1) * c.baseline_integral;
    c.K4 = 4.0 * c.beta0_l1 * std::exp(4.0 * K1 * c.beta0_l1);
    c.K5 = 2.0 * std::exp(4.0 * K1 * c.beta0_l1);
    return c;
}

TailBound tail_bound(double gamma, int n, double K1, double K3, int p) {
    if (n < 1 || p < 1) throw ConfigError("tail bound needs n >= 1 and p >= 1");
    if (!(gamma >= 0.0) || !(K1 > 0.0) || !(K3 >= 0.0)) throw ConfigError("tail bound needs gamma >= 0, K1 > 0, K3 >= 0");
    TailBound out;
    const double nn = static_cast<double>(n);
    const double denom = 2.0 * (2.0 * K1 * gamma / nn + K3 / nn);
    out.single = denom > 0.0 ? 2.0 * std::exp(-gamma * gamma / denom) : (gamma > 0.0 ? 0.0 : 2.0);
    out.union_bound = std::min(1.0, p * out.single);
    return out;
}

std::optional<double> theorem44_bound(double K4, double gamma, double re, double eps_n) {
    const double denom = re * re - eps_n;
    if (!(denom > 0.0)) return std::nullopt;
    return K4 * gamma / denom;
}

Theorem45Bounds theorem45_bounds(double K5, int S, double gamma, double kappa, double f_q, double q, double eps_n) {
    if (!(q > 1.0)) throw ConfigError("the l_q bound needs q > 1");
    if (S < 1) throw ConfigError("the l_q bound needs S >= 1");
    Theorem45Bounds out;
    const double s = static_cast<double>(S);
    const double k2 = kappa * kappa;
    if (k2 - 4.0 * s * eps_n > 0.0) out.l1 = 4.0 * K5 * s * gamma / (k2 - 4.0 * s * eps_n);
    if (k2 - 2.0 * s * eps_n > 0.0 && f_q > 0.0) {
        const double sq = std::pow(s, 1.0 / q);
        out.lq = (2.0 * sq * eps_n / f_q) * (2.0 * K5 * s * gamma / (k2 - 2.0 * s * eps_n)) + 2.0 * K5 * sq * gamma / f_q;
    }
    return out;
}

TailEstimate binomial_estimate(int successes, int trials) {
    if (trials < 1 || successes < 0 || successes > trials) throw ConfigError("binomial estimate needs 0 <= k <= n, n >= 1");
    constexpr double z = 1.959963984540054;
    TailEstimate t;
    t.reps = trials;
    t.exceed = successes;
    const double n = trials;
    const double ph = successes / n;
    t.probability = ph;
    const double denom = 1.0 + z * z / n;
    const double center = (ph + z * z / (2.0 * n)) / denom;
    const double half = z * std::sqrt(ph * (1.0 - ph) / n + z * z / (4.0 * n * n)) / denom;
    // The endpoints are exact at k = 0 and k = n; rounding would otherwise leave ~1e-18 residue.
    t.lower = successes == 0 ? 0.0 : std::max(0.0, center - half);
    t.upper = successes == trials ? 1.0 : std::min(1.0, center + half);
    return t;
}

std::vector<double> score_sup_norms(const SimConfig& config, int reps, std::uint64_t stream, int jobs) {
    config.validate();
    if (reps < 1) throw ConfigError("reps must be >= 1");
    const Vector beta0 = config.beta0();
    std::vector<double> norms(static_cast<std::size_t>(reps));
    parallel_for(reps, jobs, [&](int r) {
        const SurvivalDataset data = simulate_replication(config, static_cast<std::uint64_t>(r), stream);
        norms[static_cast<std::size_t>(r)] = linf_norm(evaluate_score(data, beta0).score);
    });
    return norms;
}

TailEstimate tail_from_norms(const std::vector<double>& norms, double gamma) {
    const auto exceed = std::count_if(norms.begin(), norms.end(), [&](double v) { return v >= gamma; });
    return binomial_estimate(static_cast<int>(exceed), static_cast<int>(norms.size()));
}

TailEstimate mc_score_tail(const SimConfig& config, double gamma, int reps, std::uint64_t stream, int jobs) {
    if (reps < 100) throw ConfigError("Monte Carlo tail estimate needs reps >= 100");
    if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
    return tail_from_norms(score_sup_norms(config, reps, stream, jobs), gamma);
}

// =============================================================================
// Experiment
// =============================================================================

void ExperimentConfig::validate() const {
    SimConfig probe = sim;
    if (n_grid.empty()) throw ConfigError("experiment n_grid must be nonempty");
    for (int n : n_grid) {
        probe.n = n;
        probe.validate();
    }
    if (reps < 1) throw ConfigError("experiment reps must be >= 1");
    if (K2 && !(*K2 > 0.0)) throw ConfigError("K2 must be positive");
    gamma_schedule(n_grid.front(), sim.p, 1.0, alpha);  // rejects alpha outside (0, 1/2]
    if (!(calibration_coverage > 0.0 && calibration_coverage < 1.0))
        throw ConfigError("calibration_coverage must lie in (0, 1)");
    if (calibration_reps < 10) throw ConfigError("calibration_reps must be >= 10");
    if (population_n < 1000) throw ConfigError("population_n must be >= 1000");
    if (population_reps < 1) throw ConfigError("population_reps must be >= 1");
    if (!(q > 1.0)) throw ConfigError("experiment q must be > 1");
}

double calibrate_K2(const SimConfig& config, int n, double alpha, double coverage, int reps, int jobs) {
    SimConfig c = config;
    c.n = n;
    std::vector<double> norms = score_sup_norms(c, reps, kCalibrationStream, jobs);
    std::sort(norms.begin(), norms.end());
    const auto idx = static_cast<std::size_t>(std::clamp<long>(
        static_cast<long>(std::ceil(coverage * reps)) - 1, 0L, static_cast<long>(reps) - 1));
    const double gamma = norms[idx];
    if (!(gamma > 0.0)) throw ComputeError("calibration produced a zero score quantile");
    return gamma / gamma_schedule(n, c.p, 1.0, alpha);
}

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
    return m;
}

ReplicationRecord run_replication(const ExperimentConfig& cfg, const ExperimentReport& rep, const SupportSet& T0,
                                  const Vector& beta0, int n, int r) {
    ReplicationRecord rec;
    rec.n = n;
    rec.rep = r;
    rec.gamma = gamma_schedule(n, cfg.sim.p, rep.K2, cfg.alpha);

    SimConfig c = cfg.sim;
    c.n = n;
    const SurvivalDataset data = simulate_replication(c, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(n));

    SolverConfig solver = cfg.solver;
    solver.gamma = rec.gamma;
    solver.warm_start.reset();
    const EstimateResult fit = solve_dsfph(data, solver);
    rec.status = to_string(fit.status);
    rec.outer_iters = fit.outer_iters;

    const Vector h = fit.beta_hat - beta0;
    rec.l1_error = l1_norm(h);
    rec.l2_error = h.norm();
    rec.lq_error = lq_norm(h, cfg.q);
    rec.beta_hat_l1 = fit.objective;

    const ScoreHessian at0 = evaluate(data, beta0);
    rec.score_at_beta0 = linf_norm(at0.score);
    rec.beta0_feasible = rec.score_at_beta0 <= rec.gamma;
    rec.eps_n = sup_norm_diff(at0.hessian, rep.population.matrix);

    const bool fit_ok = fit.status != FitStatus::Infeasible;
    rec.l1_not_above_truth = fit_ok && fit.objective <= l1_norm(beta0) + 1e-6;
    rec.cone_member = fit_ok && in_cone(T0, h, 1e-6);
    rec.proof_lhs = h.dot(at0.hessian * h);
    rec.proof_rhs = std::exp(covariate_spread(data, h)) * (2.0 * rec.gamma + solver.feasibility_slack) * l1_norm(h);
    rec.proof_holds = rec.proof_lhs <= rec.proof_rhs * (1.0 + 1e-8) + 1e-14;

    if (rec.beta0_feasible) {
        rec.thm44 = theorem44_bound(rep.constants.K4, rec.gamma, rep.re.value, rec.eps_n);
        const auto t45 = theorem45_bounds(rep.constants.K5, T0.size(), rec.gamma, rep.kappa.value, rep.f_q.value,
                                          cfg.q, rec.eps_n);
        rec.thm45_l1 = t45.l1;
        rec.thm45_lq = t45.lq;
    }
    rec.ok = true;
    return rec;
}

void tally(BoundTally& t, const std::optional<double>& bound, double observed) {
    if (!bound) return;
    ++t.eligible;
    if (observed <= *bound) ++t.satisfied;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, int jobs) {
    config.validate();
    ExperimentReport rep;
    rep.config = config;
    const Vector beta0 = config.sim.beta0();
    const SupportSet T0 = SupportSet::first(config.sim.s);
    rep.constants = constants_from_truth(beta0, config.sim.K1, config.sim);

    if (config.K2) {
        rep.K2 = *config.K2;
    } else {
        rep.K2 = calibrate_K2(config.sim, config.n_grid.front(), config.alpha, config.calibration_coverage,
                              config.calibration_reps, jobs);
        rep.K2_calibrated = true;
    }

    rep.population = population_matrix(config.sim, beta0, config.population_n, config.population_reps);
    rep.kappa = compatibility_factor(rep.population.matrix, T0, config.factor);
    FactorOptions seeded = config.factor;
    seeded.seeds.push_back(rep.kappa.best_h);
    rep.re = restricted_eigenvalue(rep.population.matrix, T0, seeded);
    seeded.seeds.push_back(rep.re.best_h);
    rep.f_q = weak_cone_invertibility_factor(rep.population.matrix, T0, config.q, seeded);

    const int per_n = config.reps;
    const int total = static_cast<int>(config.n_grid.size()) * per_n;
    rep.records.resize(static_cast<std::size_t>(total));
    parallel_for(total, jobs, [&](int k) {
        const int n = config.n_grid[static_cast<std::size_t>(k / per_n)];
        const int r = k % per_n;
        ReplicationRecord& rec = rep.records[static_cast<std::size_t>(k)];
        try {
            rec = run_replication(config, rep, T0, beta0, n, r);
        } catch (const std::exception& e) {
            rec = ReplicationRecord{};
            rec.n = n;
            rec.rep = r;
            rec.gamma = gamma_schedule(n, config.sim.p, rep.K2, config.alpha);
            rec.ok = false;
            rec.error = e.what();
        }
    });

    for (std::size_t g = 0; g < config.n_grid.size(); ++g) {
        GridSummary s;
        s.n = config.n_grid[g];
        s.gamma = gamma_schedule(s.n, config.sim.p, rep.K2, config.alpha);
        s.reps = per_n;
        std::vector<double> l1, l2, eps;
        for (int r = 0; r < per_n; ++r) {
            const auto& rec = rep.records[g * static_cast<std::size_t>(per_n) + static_cast<std::size_t>(r)];
            if (!rec.ok) {
                ++s.failed;
                continue;
            }
            l1.push_back(rec.l1_error);
            l2.push_back(rec.l2_error);
            eps.push_back(rec.eps_n);
            if (!rec.beta0_feasible) continue;
            ++s.feasible;
            if (!rec.l1_not_above_truth) ++s.norm_violations;
            if (!rec.cone_member) ++s.cone_violations;
            if (!rec.proof_holds) ++s.proof_violations;
            tally(s.thm44, rec.thm44, rec.l2_error * rec.l2_error);
            tally(s.thm45_l1, rec.thm45_l1, rec.l1_error);
            tally(s.thm45_lq, rec.thm45_lq, rec.lq_error);
        }
        s.median_l1_error = median(l1);
        s.median_l2_error = median(l2);
        s.median_eps_n = median(eps);
        rep.failed += s.failed;
        rep.summaries.push_back(s);
    }
    rep.ok = rep.failed * 10 <= total;
    return rep;
}

namespace {

std::string opt_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string csv_text(std::string s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string experiment_csv(const ExperimentReport& report) {
    std::ostringstream out;
    out << "n,rep,gamma,ok,status,outer_iters,l1_error,l2_error,lq_error,beta_hat_l1,score_at_beta0,"
           "beta0_feasible,eps_n,l1_not_above_truth,cone_member,proof_lhs,proof_rhs,proof_holds,"
           "thm44_bound,thm45_l1_bound,thm45_lq_bound,error\n";
    for (const auto& r : report.records) {
        out << r.n << ',' << r.rep << ',' << format_double(r.gamma) << ',' << int(r.ok) << ',' << r.status << ','
            << r.outer_iters << ',' << format_double(r.l1_error) << ',' << format_double(r.l2_error) << ','
            << format_double(r.lq_error) << ',' << format_double(r.beta_hat_l1) << ','
            << format_double(r.score_at_beta0) << ',' << int(r.beta0_feasible) << ',' << format_double(r.eps_n)
            << ',' << int(r.l1_not_above_truth) << ',' << int(r.cone_member) << ',' << format_double(r.proof_lhs)
            << ',' << format_double(r.proof_rhs) << ',' << int(r.proof_holds) << ',' << opt_cell(r.thm44) << ','
            << opt_cell(r.thm45_l1) << ',' << opt_cell(r.thm45_lq) << ',' << csv_text(r.error) << '\n';
    }
    return out.str();
}

// =============================================================================
// JSON
// =============================================================================

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = c.sim;
    j.erase("n");
    j["n_grid"] = c.n_grid;
    j["reps"] = c.reps;
    j["K2"] = c.K2 ? nlohmann::json(*c.K2) : nlohmann::json(nullptr);
    j["alpha"] = c.alpha;
    j["calibration_coverage"] = c.calibration_coverage;
    j["calibration_reps"] = c.calibration_reps;
    j["population_n"] = c.population_n;
    j["population_reps"] = c.population_reps;
    j["q"] = c.q;
    j["factor_restarts"] = c.factor.restarts;
    j["oracle_samples"] = c.factor.oracle_samples;
    j["factor_seed"] = c.factor.seed;
    j["max_outer"] = c.solver.max_outer;
    j["outer_tol"] = c.solver.outer_tol;
    j["lp_tol"] = c.solver.lp_tol;
    j["feasibility_slack"] = c.solver.feasibility_slack;
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    if (!j.contains("seed")) throw ConfigError("experiment config must set \"seed\" (no clock-based seeding)");
    c = ExperimentConfig{};
    c.sim = j.get<SimConfig>();
    c.n_grid = j.value("n_grid", c.n_grid);
    c.reps = j.value("reps", c.reps);
    if (j.contains("K2") && !j.at("K2").is_null()) c.K2 = j.at("K2").get<double>();
    c.alpha = j.value("alpha", c.alpha);
    c.calibration_coverage = j.value("calibration_coverage", c.calibration_coverage);
    c.calibration_reps = j.value("calibration_reps", c.calibration_reps);
    c.population_n = j.value("population_n", c.population_n);
    c.population_reps = j.value("population_reps", c.population_reps);
    c.q = j.value("q", c.q);
    c.factor.restarts = j.value("factor_restarts", c.factor.restarts);
    c.factor.oracle_samples = j.value("oracle_samples", c.factor.oracle_samples);
    c.factor.seed = j.value("factor_seed", c.factor.seed);
    c.solver.max_outer = j.value("max_outer", c.solver.max_outer);
    c.solver.outer_tol = j.value("outer_tol", c.solver.outer_tol);
    c.solver.lp_tol = j.value("lp_tol", c.solver.lp_tol);
    c.solver.feasibility_slack = j.value("feasibility_slack", c.solver.feasibility_slack);
}

void to_json(nlohmann::json& j, const TailEstimate& t) {
    j = nlohmann::json{{"reps", t.reps},   {"exceed", t.exceed}, {"probability", t.probability},
                       {"lower", t.lower}, {"upper", t.upper},   {"half_width", t.half_width()}};
}

namespace {

nlohmann::json tally_json(const BoundTally& t) {
    return {{"eligible", t.eligible}, {"satisfied", t.satisfied}, {"rate", t.rate()}};
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

void to_json(nlohmann::json& j, const ExperimentReport& r) {
    j = nlohmann::json::object();
    j["config"] = r.config;
    j["K2"] = r.K2;
    j["K2_calibrated"] = r.K2_calibrated;
    j["constants"] = {{"K3", r.constants.K3},
                      {"K4", r.constants.K4},
                      {"K5", r.constants.K5},
                      {"baseline_integral", r.constants.baseline_integral},
                      {"beta0_l1", r.constants.beta0_l1}};
    j["population"] = r.population;
    j["factors"] = {{"kappa", r.kappa}, {"re", r.re}, {"f_q", r.f_q}, {"q", r.config.q}};
    nlohmann::json summaries = nlohmann::json::array();
    for (const auto& s : r.summaries)
        summaries.push_back({{"n", s.n},
                             {"gamma", s.gamma},
                             {"reps", s.reps},
                             {"failed", s.failed},
                             {"feasible", s.feasible},
                             {"median_l1_error", s.median_l1_error},
                             {"median_l2_error", s.median_l2_error},
                             {"median_eps_n", s.median_eps_n},
                             {"norm_violations", s.norm_violations},
                             {"cone_violations", s.cone_violations},
                             {"proof_violations", s.proof_violations},
                             {"thm44", tally_json(s.thm44)},
                             {"thm45_l1", tally_json(s.thm45_l1)},
                             {"thm45_lq", tally_json(s.thm45_lq)}});
    j["summaries"] = std::move(summaries);
    nlohmann::json records = nlohmann::json::array();
    for (const auto& rec : r.records) {
        nlohmann::json row = {{"n", rec.n},
                              {"rep", rec.rep},
                              {"gamma", rec.gamma},
                              {"ok", rec.ok},
                              {"status", rec.status},
                              {"outer_iters", rec.outer_iters},
                              {"l1_error", rec.l1_error},
                              {"l2_error", rec.l2_error},
                              {"lq_error", rec.lq_error},
                              {"beta0_feasible", rec.beta0_feasible},
                              {"eps_n", rec.eps_n},
                              {"cone_member", rec.cone_member},
                              {"proof_holds", rec.proof_holds},
                              {"thm44_bound", optional_json(rec.thm44)},
                              {"thm45_l1_bound", optional_json(rec.thm45_l1)},
                              {"thm45_lq_bound", optional_json(rec.thm45_lq)}};
        if (!rec.error.empty()) row["error"] = rec.error;
        records.push_back(std::move(row));
    }
    j["records"] = std::move(records);
    j["failed"] = r.failed;
    j["ok"] = r.ok;
}

}  // namespace hazard_dantzig
