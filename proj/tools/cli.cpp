#include "cli.hpp"

#include "hazard_dantzig/bounds.hpp"
#include "hazard_dantzig/dantzig.hpp"
#include "hazard_dantzig/factors.hpp"
#include "hazard_dantzig/json_util.hpp"
#include "hazard_dantzig/parallel.hpp"
#include "hazard_dantzig/survival_sim.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace hazard_dantzig {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Manifest {
    std::string command;
    std::vector<std::string> arguments;
    json config = json::object();
    json seeds = json::array();
    std::vector<std::string> outputs;
};

void write_manifest(const fs::path& path, const Manifest& m, double seconds) {
    json j = {{"command", m.command},
              {"arguments", m.arguments},
              {"config", m.config},
              {"seeds", m.seeds},
              {"version", kVersion},
              {"duration_seconds", seconds},
              {"outputs", m.outputs}};
    write_file_atomic(path, j.dump(2) + "\n");
}

fs::path manifest_beside(const fs::path& out) {
    fs::path m = out;
    m += ".manifest.json";
    return m;
}

/// A config file, or a manifest whose "config" block is reused.
json load_config(const std::string& path) {
    json j = read_json_file(path);
    if (j.is_object() && j.contains("command") && j.contains("config")) return j.at("config");
    return j;
}

// -----------------------------------------------------------------------------
// Simulation flags shared by several subcommands
// -----------------------------------------------------------------------------

struct SimFlags {
    std::string config;
    int n = 0, p = 0, s = 0;
    std::uint64_t seed = 0;
    std::vector<double> beta0;
    double censor_rate = 0.0, K1 = 0.0, tau = 0.0;
    std::string baseline, covariates;
    double rate = 1.0, shape = 1.0, scale = 1.0;
    double half_width = 0.99, sigma = 1.0, clip = 0.0, value = 0.5;
    std::map<std::string, CLI::Option*> opts;

    void attach(CLI::App* app) {
        opts["config"] = app->add_option("--config", config, "Simulation config JSON (or a manifest)");
        opts["n"] = app->add_option("--n", n, "Sample size");
        opts["p"] = app->add_option("--p", p, "Number of covariates");
        opts["s"] = app->add_option("--s", s, "Sparsity (support = first s coordinates)");
        opts["seed"] = app->add_option("--seed", seed, "Random seed");
        opts["beta0"] = app->add_option("--beta0", beta0, "Nonzero entries of beta_0 (length s)");
        opts["censor"] = app->add_option("--censor-rate", censor_rate, "Target censored fraction in [0, 1)");
        opts["k1"] = app->add_option("--k1", K1, "Covariate bound K1");
        opts["tau"] = app->add_option("--tau", tau, "Study horizon");
        opts["baseline"] = app->add_option("--baseline", baseline, "constant | weibull")
                               ->check(CLI::IsMember({"constant", "weibull"}));
        opts["rate"] = app->add_option("--rate", rate, "Constant baseline rate");
        opts["shape"] = app->add_option("--shape", shape, "Weibull shape");
        opts["scale"] = app->add_option("--scale", scale, "Weibull scale");
        opts["covariates"] = app->add_option("--covariates", covariates, "uniform | rademacher | clipped_gaussian | constant")
                                 ->check(CLI::IsMember({"uniform", "rademacher", "clipped_gaussian", "constant"}));
        opts["half_width"] = app->add_option("--half-width", half_width, "Uniform covariate half-width");
        opts["sigma"] = app->add_option("--sigma", sigma, "Clipped-gaussian sigma");
        opts["clip"] = app->add_option("--clip", clip, "Clipped-gaussian clip (0: 0.99 K1)");
        opts["value"] = app->add_option("--value", value, "Constant covariate value");
    }

    bool given(const std::string& key) const { return opts.at(key)->count() > 0; }

    SimConfig build() const {
        SimConfig c;
        if (given("config")) c = load_config(config).get<SimConfig>();
        if (given("n")) c.n = n;
        if (given("p")) c.p = p;
        if (given("s")) {
            c.s = s;
            if (!given("beta0") && static_cast<int>(c.beta0_values.size()) != s) {
                c.beta0_values.assign(static_cast<std::size_t>(s), 1.0);
                for (int j = 1; j < s; j += 2) c.beta0_values[static_cast<std::size_t>(j)] = -1.0;
            }
        }
        if (given("seed")) c.seed = seed;
        if (given("beta0")) c.beta0_values = beta0;
        if (given("censor")) c.censor_rate = censor_rate;
        if (given("k1")) c.K1 = K1;
        if (given("tau")) c.tau = tau;
        if (given("baseline")) {
            if (baseline == "constant")
                c.baseline = ConstantBaseline{rate};
            else
                c.baseline = WeibullBaseline{shape, scale};
        } else if (given("rate") && std::holds_alternative<ConstantBaseline>(c.baseline)) {
            c.baseline = ConstantBaseline{rate};
        }
        if (given("covariates")) {
            if (covariates == "uniform")
                c.covariate_law = UniformCovariates{half_width};
            else if (covariates == "rademacher")
                c.covariate_law = RademacherCovariates{};
            else if (covariates == "clipped_gaussian")
                c.covariate_law = ClippedGaussianCovariates{sigma, clip};
            else
                c.covariate_law = ConstantCovariates{value};
        }
        c.validate();
        return c;
    }
};

// -----------------------------------------------------------------------------
// Subcommands
// -----------------------------------------------------------------------------

struct Context {
    Manifest manifest;
    fs::path manifest_path;
    int jobs = 1;
    std::ostream* out = nullptr;
};

void run_simulate(const SimFlags& flags, const std::string& out_path, Context& ctx) {
    const SimConfig config = flags.build();
    const SurvivalDataset data = simulate_dataset(config);
    std::ostringstream csv;
    write_csv(csv, data);
    write_file_atomic(out_path, csv.str());
    ctx.manifest.config = config;
    ctx.manifest.seeds = {config.seed};
    ctx.manifest.outputs = {out_path};
    ctx.manifest_path = manifest_beside(out_path);
    *ctx.out << "wrote " << data.n() << " rows (" << data.events() << " events) to " << out_path << "\n";
}

struct FitFlags {
    std::string data, out;
    double gamma = 0.0, k2 = 1.0, alpha = 0.5;
    std::vector<double> grid;
    SolverConfig solver;
    CLI::Option* gamma_opt = nullptr;
    CLI::Option* k2_opt = nullptr;
    CLI::Option* grid_opt = nullptr;
};

void run_fit(const FitFlags& f, Context& ctx) {
    const SurvivalDataset data = load_csv(f.data);
    SolverConfig solver = f.solver;
    json echo = {{"data", f.data},
                 {"max_outer", solver.max_outer},
                 {"outer_tol", solver.outer_tol},
                 {"lp_tol", solver.lp_tol},
                 {"feasibility_slack", solver.feasibility_slack}};
    json result;
    if (f.grid_opt->count()) {
        echo["gamma_grid"] = f.grid;
        const GridFit grid = gamma_grid_fit(data, f.grid, solver);
        result = {{"fits", grid.fits}, {"objective_monotone", grid.objective_monotone}};
    } else {
        if (f.gamma_opt->count()) {
            solver.gamma = f.gamma;
        } else if (f.k2_opt->count()) {
            solver.gamma = gamma_schedule(data.n(), data.p(), f.k2, f.alpha);
            echo["k2"] = f.k2;
            echo["alpha"] = f.alpha;
        } else {
            throw ConfigError("fit needs --gamma, --k2 (with --alpha) or --gamma-grid");
        }
        echo["gamma"] = solver.gamma;
        const EstimateResult fit = solve_dsfph(data, solver);
        result = fit;
        *ctx.out << "status " << to_string(fit.status) << ", ||beta_hat||_1 = " << fit.objective
                 << ", ||U_n(beta_hat)||_inf = " << fit.constraint_value << " (gamma " << fit.gamma << ")\n";
    }
    write_file_atomic(f.out, result.dump(2) + "\n");
    ctx.manifest.config = echo;
    ctx.manifest.outputs = {f.out};
    ctx.manifest_path = manifest_beside(f.out);
}

struct FactorFlags {
    std::string matrix, out;
    std::vector<int> support;
    int n_big = 20000, mc_reps = 4;
    FactorReportOptions report;
    bool no_phi = false, no_uup = false;
    CLI::Option* support_opt = nullptr;
    CLI::Option* matrix_opt = nullptr;
};

void run_factors(const FactorFlags& f, const SimFlags& sim, Context& ctx) {
    Matrix M;
    json echo = json::object();
    int s = 0;
    std::optional<PopulationMatrix> population;
    if (f.matrix_opt->count()) {
        const fs::path path = f.matrix;
        M = path.extension() == ".json" ? matrix_from_json(read_json_file(path)) : load_matrix_csv(path);
        echo["matrix"] = f.matrix;
        if (sim.given("s")) s = sim.s;
    } else if (sim.given("config") || sim.given("p")) {
        const SimConfig config = sim.build();
        population = population_matrix(config, config.beta0(), f.n_big, f.mc_reps);
        M = population->matrix;
        s = config.s;
        echo["sim"] = config;
        echo["n_big"] = f.n_big;
        echo["mc_reps"] = f.mc_reps;
        ctx.manifest.seeds.push_back(config.seed);
    } else {
        throw ConfigError("factors needs --matrix or a simulation config for the population surrogate");
    }
    SupportSet T0;
    if (f.support_opt->count()) {
        T0 = SupportSet::from_one_based(f.support);
    } else if (s > 0) {
        T0 = SupportSet::first(s);
    } else {
        throw ConfigError("factors needs --support or --s");
    }
    FactorReportOptions opts = f.report;
    opts.include_phi = !f.no_phi;
    opts.include_uup = !f.no_uup;
    const FactorReport report = factor_report(M, T0, opts);

    json result = report;
    std::vector<int> one_based;
    for (int j : T0.indices()) one_based.push_back(j + 1);
    result["support"] = one_based;
    if (population) result["population"] = {{"n_used", population->n_used},
                                            {"mc_reps", population->mc_reps},
                                            {"stderr_sup", population->stderr_sup}};
    write_file_atomic(f.out, result.dump(2) + "\n");

    echo["support"] = one_based;
    echo["q_values"] = opts.q_values;
    echo["q_max"] = opts.q_max;
    echo["restarts"] = opts.factor.restarts;
    echo["oracle_samples"] = opts.factor.oracle_samples;
    echo["subset_budget"] = opts.subsets.budget;
    echo["sampled"] = opts.subsets.sampled;
    ctx.manifest.config = echo;
    ctx.manifest.seeds.push_back(opts.factor.seed);
    ctx.manifest.outputs = {f.out};
    ctx.manifest_path = manifest_beside(f.out);
    *ctx.out << "kappa " << report.kappa.value << ", RE " << report.re.value << "\n";
}

struct TailFlags {
    std::vector<int> n_values;
    std::vector<double> gammas;
    double k2 = 1.0, alpha = 0.5;
    int reps = 500;
    std::string out;
    CLI::Option* gamma_opt = nullptr;
    CLI::Option* k2_opt = nullptr;
};

void run_tail(const TailFlags& f, const SimFlags& sim, Context& ctx) {
    const SimConfig base = sim.build();
    if (!f.gamma_opt->count() && !f.k2_opt->count()) throw ConfigError("tail needs --gamma or --k2");
    const TruthConstants constants = constants_from_truth(base.beta0(), base.K1, base);
    std::vector<int> ns = f.n_values.empty() ? std::vector<int>{base.n} : f.n_values;
    json rows = json::array();
    for (int n : ns) {
        SimConfig c = base;
        c.n = n;
        if (f.reps < 100) throw ConfigError("tail needs --reps >= 100");
        const auto norms = score_sup_norms(c, f.reps, kTailStream, ctx.jobs);
        std::vector<double> gammas = f.gammas;
        if (f.k2_opt->count()) gammas.push_back(gamma_schedule(n, c.p, f.k2, f.alpha));
        for (double g : gammas) {
            const TailEstimate est = tail_from_norms(norms, g);
            const TailBound bound = tail_bound(g, n, c.K1, constants.K3, c.p);
            rows.push_back({{"n", n},
                            {"gamma", g},
                            {"empirical", est},
                            {"bound_single", bound.single},
                            {"bound_union", bound.union_bound},
                            {"within_bound", est.probability <= bound.union_bound + est.half_width()}});
        }
    }
    json result = {{"K3", constants.K3}, {"rows", rows}};
    write_file_atomic(f.out, result.dump(2) + "\n");
    json echo = {{"sim", base}, {"n", ns}, {"gamma", f.gammas}, {"reps", f.reps}};
    if (f.k2_opt->count()) {
        echo["k2"] = f.k2;
        echo["alpha"] = f.alpha;
    }
    ctx.manifest.config = echo;
    ctx.manifest.seeds = {base.seed};
    ctx.manifest.outputs = {f.out};
    ctx.manifest_path = manifest_beside(f.out);
    *ctx.out << "wrote " << rows.size() << " tail rows to " << f.out << "\n";
}

struct BoundFlags {
    double gamma = 0.0, re = 0.0, kappa = 0.0, fq = 0.0, q = 2.0, eps = 0.0, k4 = 0.0, k5 = 0.0;
    std::string out;
    CLI::Option* k4_opt = nullptr;
    CLI::Option* k5_opt = nullptr;
    CLI::Option* re_opt = nullptr;
    CLI::Option* kappa_opt = nullptr;
    CLI::Option* fq_opt = nullptr;
};

json bound_json(const std::optional<double>& v) { return v ? json(*v) : json("vacuous"); }

void run_bounds(const BoundFlags& f, const SimFlags& sim, Context& ctx) {
    json echo = {{"gamma", f.gamma}, {"q", f.q}, {"eps_n", f.eps}};
    TruthConstants constants;
    int S = sim.given("s") ? sim.s : 0;
    if (sim.given("config") || sim.given("p")) {
        const SimConfig config = sim.build();
        constants = constants_from_truth(config.beta0(), config.K1, config);
        S = config.s;
        echo["sim"] = config;
    }
    if (f.k4_opt->count()) constants.K4 = f.k4;
    if (f.k5_opt->count()) constants.K5 = f.k5;
    echo["K4"] = constants.K4;
    echo["K5"] = constants.K5;
    echo["S"] = S;

    json result = {{"constants", {{"K3", constants.K3}, {"K4", constants.K4}, {"K5", constants.K5}}}};
    if (f.re_opt->count()) {
        result["theorem44_l2_squared"] = bound_json(theorem44_bound(constants.K4, f.gamma, f.re, f.eps));
        echo["re"] = f.re;
    }
    if (f.kappa_opt->count()) {
        if (S < 1) throw ConfigError("Theorem 4.5 bounds need the sparsity --s");
        const auto t = theorem45_bounds(constants.K5, S, f.gamma, f.kappa, f.fq_opt->count() ? f.fq : 0.0, f.q, f.eps);
        result["theorem45_l1"] = bound_json(t.l1);
        result["theorem45_lq"] = bound_json(t.lq);
        echo["kappa"] = f.kappa;
        if (f.fq_opt->count()) echo["f_q"] = f.fq;
    }
    write_file_atomic(f.out, result.dump(2) + "\n");
    ctx.manifest.config = echo;
    ctx.manifest.outputs = {f.out};
    ctx.manifest_path = manifest_beside(f.out);
    *ctx.out << result.dump() << "\n";
}

void run_experiment_command(const std::string& config_path, const std::string& out_dir, Context& ctx, int& code) {
    const ExperimentConfig config = load_config(config_path).get<ExperimentConfig>();
    const ExperimentReport report = run_experiment(config, ctx.jobs);
    const fs::path dir = out_dir;
    const fs::path report_path = dir / "report.json";
    const fs::path csv_path = dir / "replications.csv";
    write_file_atomic(report_path, json(report).dump(2) + "\n");
    write_file_atomic(csv_path, experiment_csv(report));
    ctx.manifest.config = config;
    ctx.manifest.seeds = {config.sim.seed, config.factor.seed};
    ctx.manifest.outputs = {report_path.string(), csv_path.string()};
    ctx.manifest_path = dir / "manifest.json";
    for (const auto& s : report.summaries)
        *ctx.out << "n = " << s.n << ": median l2 error " << s.median_l2_error << ", feasible " << s.feasible << "/"
                 << s.reps << ", failed " << s.failed << "\n";
    if (!report.ok) {
        *ctx.out << "more than 10% of replications failed\n";
        code = 2;
    }
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dantzig selector for the Cox proportional hazards model", "hazard_dantzig"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    app.fallthrough();
    std::optional<int> jobs_flag;
    app.add_option("--jobs", jobs_flag, "Worker threads (default: HAZARD_DANTZIG_JOBS, else all cores)");

    SimFlags sim_simulate, sim_factors, sim_tail, sim_bounds;
    std::string simulate_out;
    auto* simulate = app.add_subcommand("simulate", "Simulate a Cox-model dataset to CSV");
    sim_simulate.attach(simulate);
    simulate->add_option("--out", simulate_out, "Output CSV")->required();

    FitFlags fit_flags;
    auto* fit = app.add_subcommand("fit", "Fit the Dantzig selector to a CSV dataset");
    fit->add_option("--data", fit_flags.data, "Input CSV")->required();
    fit_flags.gamma_opt = fit->add_option("--gamma", fit_flags.gamma, "Constraint level gamma");
    fit_flags.k2_opt = fit->add_option("--k2", fit_flags.k2, "Schedule constant K2");
    fit->add_option("--alpha", fit_flags.alpha, "Schedule exponent alpha in (0, 1/2]");
    fit_flags.grid_opt = fit->add_option("--gamma-grid", fit_flags.grid, "Descending gamma grid (warm-started sweep)");
    fit->add_option("--max-outer", fit_flags.solver.max_outer, "Maximum outer linearization steps");
    fit->add_option("--tol", fit_flags.solver.outer_tol, "Outer step tolerance");
    fit->add_option("--lp-tol", fit_flags.solver.lp_tol, "Inner duality-gap tolerance");
    fit->add_option("--slack", fit_flags.solver.feasibility_slack, "Feasibility slack on the final constraint");
    fit->add_option("--out", fit_flags.out, "Output JSON")->required();

    FactorFlags factor_flags;
    auto* factors = app.add_subcommand("factors", "Cone-restricted factors and UUP constants of a matrix");
    sim_factors.attach(factors);
    factor_flags.matrix_opt = factors->add_option("--matrix", factor_flags.matrix, "Matrix as CSV or JSON");
    factor_flags.support_opt = factors->add_option("--support", factor_flags.support, "1-based support indices");
    factors->add_option("--n-big", factor_flags.n_big, "Population surrogate sample size");
    factors->add_option("--mc-reps", factor_flags.mc_reps, "Population surrogate replications");
    factors->add_option("--q", factor_flags.report.q_values, "q values for F_q");
    factors->add_option("--q-max", factor_flags.report.q_max, "Large q standing in for infinity");
    factors->add_option("--restarts", factor_flags.report.factor.restarts, "Random restarts per factor");
    factors->add_option("--oracle-samples", factor_flags.report.factor.oracle_samples, "Dense-sampling oracle size");
    factors->add_option("--factor-seed", factor_flags.report.factor.seed, "Seed for restarts and oracle");
    factors->add_option("--budget", factor_flags.report.subsets.budget, "Exact subset enumeration budget");
    factors->add_flag("--sampled", factor_flags.report.subsets.sampled, "Sample subsets when over budget");
    factors->add_option("--samples", factor_flags.report.subsets.samples, "Subsets drawn in sampled mode");
    factors->add_flag("--no-phi", factor_flags.no_phi, "Skip phi_2S");
    factors->add_flag("--no-uup", factor_flags.no_uup, "Skip theta and the UUP margin");
    factors->add_option("--out", factor_flags.out, "Output JSON")->required();

    TailFlags tail_flags;
    auto* tail = app.add_subcommand("tail", "Monte Carlo tail of ||U_n(beta0)||_inf against the exponential bound");
    sim_tail.attach(tail);
    tail->add_option("--n-grid", tail_flags.n_values, "Sample sizes (default: config n)");
    tail_flags.gamma_opt = tail->add_option("--gamma", tail_flags.gammas, "Gamma values");
    tail_flags.k2_opt = tail->add_option("--k2", tail_flags.k2, "Add the scheduled gamma with this K2");
    tail->add_option("--alpha", tail_flags.alpha, "Schedule exponent alpha");
    tail->add_option("--reps", tail_flags.reps, "Replications (>= 100)");
    tail->add_option("--out", tail_flags.out, "Output JSON")->required();

    BoundFlags bound_flags;
    auto* bounds = app.add_subcommand("bounds", "Evaluate the l2, l1 and lq error bounds");
    sim_bounds.attach(bounds);
    bounds->add_option("--gamma", bound_flags.gamma, "Constraint level gamma")->required();
    bound_flags.re_opt = bounds->add_option("--re", bound_flags.re, "Restricted eigenvalue");
    bound_flags.kappa_opt = bounds->add_option("--kappa", bound_flags.kappa, "Compatibility factor");
    bound_flags.fq_opt = bounds->add_option("--fq", bound_flags.fq, "Weak cone invertibility factor F_q");
    bounds->add_option("--q", bound_flags.q, "q > 1 for the lq bound");
    bounds->add_option("--eps", bound_flags.eps, "eps_n = ||J_n(beta0) - I_n(beta0)||_inf");
    bound_flags.k4_opt = bounds->add_option("--k4", bound_flags.k4, "Override K4");
    bound_flags.k5_opt = bounds->add_option("--k5", bound_flags.k5, "Override K5");
    bounds->add_option("--out", bound_flags.out, "Output JSON")->required();

    std::string experiment_config, experiment_out;
    auto* experiment = app.add_subcommand("experiment", "Replicated simulate-fit-bound experiment over an n grid");
    experiment->add_option("--config", experiment_config, "Experiment config JSON (or a manifest)")->required();
    experiment->add_option("--out", experiment_out, "Output directory")->required();

    if (!args.empty() && !args.front().empty() && args.front()[0] != '-') {
        bool known = false;
        for (const auto* sub : app.get_subcommands({})) known = known || sub->get_name() == args.front();
        if (!known) {
            err << "error: unknown subcommand '" << args.front() << "'\n\n" << app.help();
            return 1;
        }
    }
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    Context ctx;
    ctx.out = &out;
    ctx.jobs = resolve_jobs(jobs_flag);
    ctx.manifest.arguments = args;
    const auto start = std::chrono::steady_clock::now();
    int code = 0;
    try {
        if (simulate->parsed()) {
            ctx.manifest.command = "simulate";
            run_simulate(sim_simulate, simulate_out, ctx);
        } else if (fit->parsed()) {
            ctx.manifest.command = "fit";
            run_fit(fit_flags, ctx);
        } else if (factors->parsed()) {
            ctx.manifest.command = "factors";
            run_factors(factor_flags, sim_factors, ctx);
        } else if (tail->parsed()) {
            ctx.manifest.command = "tail";
            run_tail(tail_flags, sim_tail, ctx);
        } else if (bounds->parsed()) {
            ctx.manifest.command = "bounds";
            run_bounds(bound_flags, sim_bounds, ctx);
        } else {
            ctx.manifest.command = "experiment";
            run_experiment_command(experiment_config, experiment_out, ctx, code);
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_manifest(ctx.manifest_path, ctx.manifest, seconds);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    } catch (const CsvParseError& e) {
        err << "input error: " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return code;
}

}  // namespace hazard_dantzig
