#include "hazard_dantzig/survival_sim.hpp"

#include "hazard_dantzig/json_util.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace hazard_dantzig {

namespace {

constexpr std::uint64_t kSimulationStream = 0x73696d;      // "sim"
constexpr std::uint64_t kCalibrationStream = 0x63616c;     // "cal"
constexpr std::uint64_t kReplicationStream = 0x726570;     // "rep"
constexpr int kPilotSize = 20000;

std::vector<double> default_beta0(int s) {
    std::vector<double> beta(static_cast<std::size_t>(std::max(s, 0)));
    for (std::size_t j = 0; j < beta.size(); ++j) beta[j] = (j % 2 == 0) ? 1.0 : -1.0;
    return beta;
}

double effective_clip(const ClippedGaussianCovariates& law, double K1) {
    return law.clip > 0.0 ? law.clip : 0.99 * K1;
}

double draw_covariate(const CovariateLaw& law, double K1, Rng& rng) {
    return std::visit(
        [&](const auto& l) -> double {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, UniformCovariates>) {
                return l.half_width * (2.0 * open_unit(rng) - 1.0);
            } else if constexpr (std::is_same_v<L, RademacherCovariates>) {
                return open_unit(rng) < 0.5 ? -1.0 : 1.0;
            } else if constexpr (std::is_same_v<L, ConstantCovariates>) {
                return l.value;
            } else {
                std::normal_distribution<double> normal(0.0, l.sigma);
                const double c = effective_clip(l, K1);
                return std::clamp(normal(rng), -c, c);
            }
        },
        law);
}

/// Event time for linear predictor eta from a unit-exponential draw.
double event_time(const Baseline& baseline, double eta, double unit_exponential) {
    return inverse_cumulative_baseline(baseline, unit_exponential * std::exp(-eta));
}

bool parse_double(std::string_view cell, double& out) {
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
        cell.remove_suffix(1);
    if (cell.empty()) return false;
    if (cell.front() == '+') cell.remove_prefix(1);
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return res.ec == std::errc() && res.ptr == cell.data() + cell.size() && std::isfinite(out);
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

std::string trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return std::string(s);
}

}  // namespace

// =============================================================================
// SurvivalDataset
// =============================================================================

int SurvivalDataset::events() const {
    return static_cast<int>(std::count(status.begin(), status.end(), 1));
}

double SurvivalDataset::event_fraction() const {
    return n() == 0 ? 0.0 : static_cast<double>(events()) / n();
}

Observation SurvivalDataset::observation(int i) const {
    return Observation{time[i], status[static_cast<std::size_t>(i)], covariates.row(i).transpose()};
}

void SurvivalDataset::validate() const {
    if (n() < 1) throw ConfigError("dataset has no observations");
    if (static_cast<int>(status.size()) != n() || covariates.rows() != n())
        throw ConfigError("dataset columns have inconsistent lengths");
    if (p() < 1) throw ConfigError("dataset has no covariates");
    for (int i = 0; i < n(); ++i) {
        if (!(time[i] > 0.0) || !std::isfinite(time[i]))
            throw ConfigError("observation " + std::to_string(i) + ": time must be positive and finite");
        if (time[i] > tau)
            throw ConfigError("observation " + std::to_string(i) + ": time exceeds study horizon tau");
        const int d = status[static_cast<std::size_t>(i)];
        if (d != 0 && d != 1)
            throw ConfigError("observation " + std::to_string(i) + ": status must be 0 or 1");
    }
    if (!covariates.allFinite()) throw ConfigError("dataset covariates must be finite");
}

bool SurvivalDataset::operator==(const SurvivalDataset& other) const {
    return time.size() == other.time.size() && time == other.time && status == other.status &&
           covariates.rows() == other.covariates.rows() &&
           covariates.cols() == other.covariates.cols() && covariates == other.covariates;
}

SurvivalDataset make_dataset(const std::vector<Observation>& observations, double tau) {
    SurvivalDataset data;
    const int n = static_cast<int>(observations.size());
    if (n == 0) throw ConfigError("dataset has no observations");
    const auto p = observations.front().covariates.size();
    data.time.resize(n);
    data.status.resize(static_cast<std::size_t>(n));
    data.covariates.resize(n, p);
    for (int i = 0; i < n; ++i) {
        const auto& obs = observations[static_cast<std::size_t>(i)];
        if (obs.covariates.size() != p)
            throw ConfigError("observation " + std::to_string(i) + " has " +
                              std::to_string(obs.covariates.size()) + " covariates, expected " +
                              std::to_string(p));
        data.time[i] = obs.time;
        data.status[static_cast<std::size_t>(i)] = obs.status;
        data.covariates.row(i) = obs.covariates.transpose();
    }
    data.tau = tau;
    data.validate();
    return data;
}

// =============================================================================
// SimConfig
// =============================================================================

void SimConfig::validate() const {
    if (n < 1) throw ConfigError("n must be a positive integer");
    if (p < 1) throw ConfigError("p must be a positive integer");
    if (s < 1) throw ConfigError("sparsity S must be a positive integer");
    if (s > p) throw ConfigError("sparsity S = " + std::to_string(s) + " exceeds p = " + std::to_string(p));
    if (static_cast<int>(beta0_values.size()) != s)
        throw ConfigError("beta0_values must have exactly S = " + std::to_string(s) + " entries");
    for (double b : beta0_values)
        if (!std::isfinite(b)) throw ConfigError("beta0_values must be finite");
    if (!(censor_rate >= 0.0 && censor_rate < 1.0)) throw ConfigError("censor_rate must lie in [0, 1)");
    if (!(K1 > 0.0) || !std::isfinite(K1)) throw ConfigError("K1 must be positive and finite");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive and finite");

    std::visit(
        [&](const auto& b) {
            using B = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<B, ConstantBaseline>) {
                if (!(b.rate > 0.0) || !std::isfinite(b.rate))
                    throw ConfigError("integrable baseline hazard: constant rate must be positive and finite");
            } else {
                if (!(b.shape > 0.0) || !std::isfinite(b.shape))
                    throw ConfigError("integrable baseline hazard: Weibull shape must be positive "
                                      "(shape <= 0 is not integrable at 0)");
                if (!(b.scale > 0.0) || !std::isfinite(b.scale))
                    throw ConfigError("integrable baseline hazard: Weibull scale must be positive and finite");
            }
        },
        baseline);

    std::visit(
        [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, UniformCovariates>) {
                if (!(l.half_width > 0.0)) throw ConfigError("uniform covariate half-width must be positive");
                if (!(l.half_width < K1))
                    throw ConfigError("bounded covariates: uniform half-width must be < K1 so that |Z_ij| < K1");
            } else if constexpr (std::is_same_v<L, RademacherCovariates>) {
                if (!(K1 > 1.0)) throw ConfigError("bounded covariates: Rademacher covariates need K1 > 1");
            } else if constexpr (std::is_same_v<L, ConstantCovariates>) {
                if (!(std::abs(l.value) < K1))
                    throw ConfigError("bounded covariates: constant covariate value must satisfy |value| < K1");
            } else {
                if (!(l.sigma > 0.0)) throw ConfigError("clipped-gaussian sigma must be positive");
                if (l.clip < 0.0) throw ConfigError("clipped-gaussian clip must be nonnegative");
                if (!(l.clip < K1))
                    throw ConfigError("bounded covariates: clipped-gaussian clip must be < K1 so that |Z_ij| < K1");
            }
        },
        covariate_law);
}

Vector SimConfig::beta0() const {
    Vector beta = Vector::Zero(p);
    for (int j = 0; j < s && j < static_cast<int>(beta0_values.size()); ++j) beta[j] = beta0_values[static_cast<std::size_t>(j)];
    return beta;
}

double cumulative_baseline(const Baseline& baseline, double t) {
    return std::visit(
        [&](const auto& b) -> double {
            using B = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<B, ConstantBaseline>) {
                return b.rate * t;
            } else {
                return std::pow(t / b.scale, b.shape);
            }
        },
        baseline);
}

double inverse_cumulative_baseline(const Baseline& baseline, double a) {
    return std::visit(
        [&](const auto& b) -> double {
            using B = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<B, ConstantBaseline>) {
                return a / b.rate;
            } else {
                return b.scale * std::pow(a, 1.0 / b.shape);
            }
        },
        baseline);
}

double calibrate_censoring_rate(const SimConfig& config) {
    if (config.censor_rate <= 0.0) return 0.0;

    Rng rng = make_rng(config.seed, kCalibrationStream);
    const Vector beta = config.beta0();
    std::vector<double> event(kPilotSize), censor_unit(kPilotSize);
    for (int i = 0; i < kPilotSize; ++i) {
        double eta = 0.0;
        for (int j = 0; j < config.s; ++j) eta += beta[j] * draw_covariate(config.covariate_law, config.K1, rng);
        event[static_cast<std::size_t>(i)] = event_time(config.baseline, eta, -std::log(open_unit(rng)));
        censor_unit[static_cast<std::size_t>(i)] = -std::log(open_unit(rng));
    }

    auto censored_fraction = [&](double rate) {
        int censored = 0;
        for (int i = 0; i < kPilotSize; ++i) {
            const double c = rate > 0.0 ? censor_unit[static_cast<std::size_t>(i)] / rate
                                        : std::numeric_limits<double>::infinity();
            if (event[static_cast<std::size_t>(i)] > std::min(c, config.tau)) ++censored;
        }
        return static_cast<double>(censored) / kPilotSize;
    };

    if (censored_fraction(0.0) >= config.censor_rate) return 0.0;

    // Censored fraction is non-decreasing in the rate under common random numbers.
    double lo = -30.0, hi = 30.0;  // log-rate bracket
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (censored_fraction(std::exp(mid)) < config.censor_rate)
            lo = mid;
        else
            hi = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

SurvivalDataset simulate_dataset(const SimConfig& config) {
    config.validate();
    const double censor_rate = calibrate_censoring_rate(config);
    const Vector beta = config.beta0();

    Rng rng = make_rng(config.seed, kSimulationStream);
    SurvivalDataset data;
    data.time.resize(config.n);
    data.status.assign(static_cast<std::size_t>(config.n), 0);
    data.covariates.resize(config.n, config.p);
    data.tau = config.tau;

    for (int i = 0; i < config.n; ++i) {
        for (int j = 0; j < config.p; ++j) data.covariates(i, j) = draw_covariate(config.covariate_law, config.K1, rng);
        const double eta = data.covariates.row(i).head(config.s).dot(beta.head(config.s));
        const double t = event_time(config.baseline, eta, -std::log(open_unit(rng)));
        const double censor_unit = -std::log(open_unit(rng));
        const double c = censor_rate > 0.0 ? censor_unit / censor_rate : std::numeric_limits<double>::infinity();
        const double limit = std::min(c, config.tau);
        data.time[i] = std::min(t, limit);
        data.status[static_cast<std::size_t>(i)] = t <= limit ? 1 : 0;
    }
    if (data.events() == 0) throw ComputeError("degenerate dataset: simulated sample has zero events");
    return data;
}

SurvivalDataset simulate_replication(const SimConfig& config, std::uint64_t replication, std::uint64_t stream) {
    SimConfig derived = config;
    Rng seeder = make_rng(config.seed, kReplicationStream + stream, replication);
    derived.seed = seeder();
    return simulate_dataset(derived);
}

// =============================================================================
// CSV
// =============================================================================

CsvParseError::CsvParseError(Kind kind, int line, const std::string& what)
    : std::runtime_error(what), kind_(kind), line_(line) {}

SurvivalDataset read_csv(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw CsvParseError(CsvParseError::Kind::MissingColumns, 1, "line 1: empty file, expected header time,status,z1,...,zp");
    const auto names = split(header);
    if (names.size() < 3 || trim(names[0]) != "time" || trim(names[1]) != "status")
        throw CsvParseError(CsvParseError::Kind::MissingColumns, 1,
                            "line 1: header must be time,status,z1,...,zp with at least one covariate");
    const std::size_t p = names.size() - 2;

    std::vector<double> times;
    std::vector<int> statuses;
    std::vector<double> z;
    std::string line;
    int line_no = 1;

    struct Problem {
        CsvParseError::Kind kind;
        int line;
        std::string message;
    };
    std::vector<Problem> problems;
    auto report = [&](CsvParseError::Kind kind, const std::string& msg) {
        problems.push_back({kind, line_no, "line " + std::to_string(line_no) + ": " + msg});
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        if (cells.size() < names.size()) {
            report(CsvParseError::Kind::MissingColumns,
                   "expected " + std::to_string(names.size()) + " columns, found " + std::to_string(cells.size()));
            continue;
        }
        if (cells.size() > names.size()) {
            report(CsvParseError::Kind::RaggedRow,
                   "expected " + std::to_string(names.size()) + " columns, found " + std::to_string(cells.size()));
            continue;
        }
        std::vector<double> values(cells.size());
        bool numeric = true;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (!parse_double(cells[c], values[c])) {
                report(CsvParseError::Kind::NonNumeric,
                       "non-numeric value '" + trim(cells[c]) + "' in column " + trim(names[c]));
                numeric = false;
                break;
            }
        }
        if (!numeric) continue;
        if (!(values[0] > 0.0)) {
            report(CsvParseError::Kind::NonPositiveTime, "time must be positive, got " + trim(cells[0]));
            continue;
        }
        if (values[1] != 0.0 && values[1] != 1.0) {
            report(CsvParseError::Kind::BadStatus, "status must be 0 or 1, got " + trim(cells[1]));
            continue;
        }
        times.push_back(values[0]);
        statuses.push_back(static_cast<int>(values[1]));
        z.insert(z.end(), values.begin() + 2, values.end());
    }

    if (!problems.empty()) {
        std::ostringstream msg;
        const std::size_t shown = std::min<std::size_t>(problems.size(), 20);
        for (std::size_t k = 0; k < shown; ++k) msg << (k ? "; " : "") << problems[k].message;
        if (problems.size() > shown) msg << "; ... (" << problems.size() - shown << " more)";
        throw CsvParseError(problems.front().kind, problems.front().line, msg.str());
    }
    if (times.empty()) throw CsvParseError(CsvParseError::Kind::MissingColumns, line_no, "no data rows");

    SurvivalDataset data;
    const auto n = static_cast<Eigen::Index>(times.size());
    data.time = Eigen::Map<const Vector>(times.data(), n);
    data.status = std::move(statuses);
    data.covariates = Eigen::Map<const RowMatrix>(z.data(), n, static_cast<Eigen::Index>(p));
    data.tau = data.time.maxCoeff();
    data.validate();
    return data;
}

SurvivalDataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CsvParseError(CsvParseError::Kind::Io, 0, "cannot open " + path.string());
    return read_csv(in);
}

void write_csv(std::ostream& out, const SurvivalDataset& dataset) {
    out << "time,status";
    for (int j = 0; j < dataset.p(); ++j) out << ",z" << (j + 1);
    out << '\n';
    for (int i = 0; i < dataset.n(); ++i) {
        out << format_double(dataset.time[i]) << ',' << dataset.status[static_cast<std::size_t>(i)];
        for (int j = 0; j < dataset.p(); ++j) out << ',' << format_double(dataset.covariates(i, j));
        out << '\n';
    }
}

// =============================================================================
// Event order
// =============================================================================

EventOrder event_order(const SurvivalDataset& dataset) {
    EventOrder order;
    for (int i = 0; i < dataset.n(); ++i)
        if (dataset.status[static_cast<std::size_t>(i)] == 1) order.events.push_back({dataset.time[i], i});
    std::sort(order.events.begin(), order.events.end(), [](const EventTime& a, const EventTime& b) {
        return a.time < b.time || (a.time == b.time && a.subject < b.subject);
    });
    for (std::size_t k = 1; k < order.events.size(); ++k)
        if (order.events[k].time == order.events[k - 1].time) order.has_ties = true;
    return order;
}

// =============================================================================
// JSON
// =============================================================================

void to_json(nlohmann::json& j, const SimConfig& c) {
    j = nlohmann::json{{"n", c.n},
                       {"p", c.p},
                       {"S", c.s},
                       {"beta0_values", c.beta0_values},
                       {"censor_rate", c.censor_rate},
                       {"K1", c.K1},
                       {"tau", c.tau},
                       {"seed", c.seed}};
    std::visit(
        [&](const auto& b) {
            using B = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<B, ConstantBaseline>)
                j["baseline"] = {{"type", "constant"}, {"rate", b.rate}};
            else
                j["baseline"] = {{"type", "weibull"}, {"shape", b.shape}, {"scale", b.scale}};
        },
        c.baseline);
    std::visit(
        [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, UniformCovariates>)
                j["covariate_law"] = {{"type", "uniform"}, {"half_width", l.half_width}};
            else if constexpr (std::is_same_v<L, RademacherCovariates>)
                j["covariate_law"] = {{"type", "rademacher"}};
            else if constexpr (std::is_same_v<L, ConstantCovariates>)
                j["covariate_law"] = {{"type", "constant"}, {"value", l.value}};
            else
                j["covariate_law"] = {{"type", "clipped_gaussian"}, {"sigma", l.sigma}, {"clip", l.clip}};
        },
        c.covariate_law);
}

void from_json(const nlohmann::json& j, SimConfig& c) {
    c = SimConfig{};
    c.n = j.value("n", c.n);
    c.p = j.value("p", c.p);
    c.s = j.contains("S") ? j.at("S").get<int>() : j.value("s", c.s);
    if (j.contains("beta0_values"))
        c.beta0_values = j.at("beta0_values").get<std::vector<double>>();
    else
        c.beta0_values = default_beta0(c.s);
    c.censor_rate = j.value("censor_rate", c.censor_rate);
    c.K1 = j.value("K1", c.K1);
    c.tau = j.value("tau", c.tau);
    c.seed = j.value("seed", c.seed);

    if (j.contains("baseline")) {
        const auto& b = j.at("baseline");
        const auto type = b.value("type", std::string("constant"));
        if (type == "constant")
            c.baseline = ConstantBaseline{b.value("rate", 1.0)};
        else if (type == "weibull")
            c.baseline = WeibullBaseline{b.value("shape", 1.0), b.value("scale", 1.0)};
        else
            throw ConfigError("unknown baseline type '" + type + "' (expected constant or weibull)");
    }
    if (j.contains("covariate_law")) {
        const auto& l = j.at("covariate_law");
        const auto type = l.value("type", std::string("uniform"));
        if (type == "uniform")
            c.covariate_law = UniformCovariates{l.value("half_width", 0.99)};
        else if (type == "rademacher")
            c.covariate_law = RademacherCovariates{};
        else if (type == "constant")
            c.covariate_law = ConstantCovariates{l.value("value", 0.5)};
        else if (type == "clipped_gaussian")
            c.covariate_law = ClippedGaussianCovariates{l.value("sigma", 1.0), l.value("clip", 0.0)};
        else
            throw ConfigError("unknown covariate_law type '" + type +
                              "' (expected uniform, rademacher, clipped_gaussian or constant)");
    }
}

}  // namespace hazard_dantzig
