#pragma once

#include "hazard_dantzig/common.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace hazard_dantzig {

// =============================================================================
// Data
// =============================================================================

struct Observation {
    double time = 0.0;  // follow-up time X = min(T, C, tau)
    int status = 0;     // 1 iff the event was observed
    Vector covariates;
};

/**
 * Right-censored survival sample stored column-wise.
 *
 * Row i of `covariates` is Z_i. The counting process N_i(t) = 1{X_i <= t, D_i = 1}
 * and at-risk indicator Y_i(t) = 1{X_i >= t} are implied by (time, status).
 */
struct SurvivalDataset {
    Vector time;
    std::vector<int> status;
    RowMatrix covariates;  // n x p
    double tau = 0.0;

    int n() const { return static_cast<int>(time.size()); }
    int p() const { return static_cast<int>(covariates.cols()); }
    int events() const;
    double event_fraction() const;
    Observation observation(int i) const;

    /// Checks every structural invariant; throws ConfigError naming the first violation.
    void validate() const;

    bool operator==(const SurvivalDataset& other) const;
};

SurvivalDataset make_dataset(const std::vector<Observation>& observations, double tau);

// =============================================================================
// Simulation config
// =============================================================================

/// alpha_0(t) = rate
struct ConstantBaseline {
    double rate = 1.0;
};

/// alpha_0(t) = (shape / scale) (t / scale)^(shape - 1)
struct WeibullBaseline {
    double shape = 1.0;
    double scale = 1.0;
};

using Baseline = std::variant<ConstantBaseline, WeibullBaseline>;

struct UniformCovariates {
    double half_width = 0.99;
};
struct RademacherCovariates {};
struct ClippedGaussianCovariates {
    double sigma = 1.0;
    double clip = 0.0;  // 0 means "clip at 0.99 K1"
};

/// Every Z_ij equals `value` (degenerate design used to exercise identical-covariate cases).
struct ConstantCovariates {
    double value = 0.5;
};

using CovariateLaw =
    std::variant<UniformCovariates, RademacherCovariates, ClippedGaussianCovariates, ConstantCovariates>;

struct SimConfig {
    int n = 100;
    int p = 10;
    int s = 3;
    std::vector<double> beta0_values{1.0, -1.0, 1.0};  // length s; support is the first s coordinates
    Baseline baseline = ConstantBaseline{};
    double censor_rate = 0.0;
    CovariateLaw covariate_law = UniformCovariates{};
    double K1 = 1.0;
    double tau = 1.0e6;
    std::uint64_t seed = 0;

    /// Rejects every bounded-covariate, integrability and sparsity violation.
    void validate() const;

    /// Full-length truth vector beta_0 (length p).
    Vector beta0() const;
};

/// Cumulative baseline hazard A_0(t) = int_0^t alpha_0.
double cumulative_baseline(const Baseline& baseline, double t);
/// Inverse of the cumulative baseline hazard.
double inverse_cumulative_baseline(const Baseline& baseline, double a);

/**
 * Rate of the exponential censoring law that yields `censor_rate` censored
 * subjects in expectation (jointly with administrative censoring at tau).
 * Calibrated by bisection on a seeded pilot sample with common random numbers.
 * Returns 0 when administrative censoring alone already reaches the target.
 */
double calibrate_censoring_rate(const SimConfig& config);

/// Draws one Cox-model sample. Pure function of `config` (including its seed).
SurvivalDataset simulate_dataset(const SimConfig& config);

/// Same as `simulate_dataset` with the seed replaced by a derived (seed, replication) stream.
SurvivalDataset simulate_replication(const SimConfig& config, std::uint64_t replication,
                                     std::uint64_t stream = 0);

// =============================================================================
// CSV
// =============================================================================

class CsvParseError : public std::runtime_error {
public:
    enum class Kind { MissingColumns, NonNumeric, BadStatus, NonPositiveTime, RaggedRow, Io };

    CsvParseError(Kind kind, int line, const std::string& what);

    Kind kind() const { return kind_; }
    int line() const { return line_; }

private:
    Kind kind_;
    int line_;
};

SurvivalDataset read_csv(std::istream& in);
SurvivalDataset load_csv(const std::filesystem::path& path);
void write_csv(std::ostream& out, const SurvivalDataset& dataset);

// =============================================================================
// Event order
// =============================================================================

struct EventTime {
    double time;
    int subject;
};

struct EventOrder {
    std::vector<EventTime> events;  // status-1 subjects sorted by (time, subject)
    bool has_ties = false;
};

EventOrder event_order(const SurvivalDataset& dataset);

// =============================================================================
// JSON
// =============================================================================

void to_json(nlohmann::json& j, const SimConfig& config);
void from_json(const nlohmann::json& j, SimConfig& config);

}  // namespace hazard_dantzig
