#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace hazard_dantzig {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Rng = std::mt19937_64;

inline constexpr const char* kVersion = "0.1.0";

/// Raised when user-supplied configuration violates a model or solver requirement.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for numerical or data conditions discovered while computing.
class ComputeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Deterministic generator for a (seed, stream, index) triple.
 *
 * Independent streams (simulation, censoring calibration, population
 * surrogate, restarts) never share a sequence for the same user seed.
 */
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

/// Uniform draw on the open interval (0, 1).
inline double open_unit(Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    return u;
}

inline double l1_norm(const Vector& v) { return v.lpNorm<1>(); }
inline double linf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

/// Overflow-safe q-norm for q >= 1.
inline double lq_norm(const Vector& v, double q) {
    const double m = linf_norm(v);
    if (m == 0.0) return 0.0;
    if (q == 1.0) return l1_norm(v);
    if (q == 2.0) return v.norm();
    double acc = 0.0;
    for (Eigen::Index j = 0; j < v.size(); ++j) acc += std::pow(std::abs(v[j]) / m, q);
    return m * std::pow(acc, 1.0 / q);
}

}  // namespace hazard_dantzig
