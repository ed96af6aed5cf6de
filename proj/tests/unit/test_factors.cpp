#include "hazard_dantzig/factors.hpp"
#include "hazard_dantzig/partial_likelihood.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace hazard_dantzig;

namespace {

FactorOptions quick() {
    FactorOptions o;
    o.restarts = 32;
    o.oracle_samples = 20000;
    return o;
}

Matrix symmetric_from_upper(const std::vector<double>& upper, int p) {
    Matrix M(p, p);
    int k = 0;
    for (int i = 0; i < p; ++i)
        for (int j = i; j < p; ++j) M(i, j) = M(j, i) = upper[static_cast<std::size_t>(k++)];
    return M;
}

Matrix equicorrelation(int p, double rho) {
    return (1.0 - rho) * Matrix::Identity(p, p) + rho * Matrix::Ones(p, p);
}

// Random direction inside the cone ||h_Tc||_1 <= ||h_T0||_1.
Vector cone_sample(Rng& rng, const SupportSet& T0, int p) {
    Vector h = oracle::random_vector(rng, p, 1.0);
    double in = 0.0, out = 0.0;
    for (int j = 0; j < p; ++j) (T0.contains(j) ? in : out) += std::abs(h[j]);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double target = unif(rng) * in;
    if (out > 0.0)
        for (int j = 0; j < p; ++j)
            if (!T0.contains(j)) h[j] *= target / out;
    return h;
}

}  // namespace

// -----------------------------------------------------------------------------
// Closed forms
// -----------------------------------------------------------------------------

TEST(Factors, IdentityMatrix) {
    const Matrix I = Matrix::Identity(8, 8);
    const SupportSet T0 = SupportSet::first(2);
    EXPECT_NEAR(compatibility_factor(I, T0, quick()).value, 1.0, 1e-6);
    EXPECT_NEAR(restricted_eigenvalue(I, T0, quick()).value, 1.0, 1e-6);
    EXPECT_NEAR(weak_cone_invertibility_factor(I, T0, 2.0, quick()).value, 1.0, 1e-6);
    EXPECT_NEAR(phi_2s(I, T0, quick()).value, 1.0, 1e-6);
}

TEST(Factors, WeakConeFactorForIdentityWithQEqualOne) {
    // Minimizer spreads mass c/7 over each of the 7 off-support coordinates, c = sqrt(30) - 3.
    const double c = std::sqrt(30.0) - 3.0;
    const double expected = (3.0 + c * c / 7.0) / (3.0 + c);
    EXPECT_NEAR(expected, 0.707778735729046, 1e-14);
    const auto f1 = weak_cone_invertibility_factor(Matrix::Identity(10, 10), SupportSet::first(3), 1.0, quick());
    EXPECT_NEAR(f1.value, expected, 1e-6);
}

TEST(Factors, DiagonalMatrix) {
    Matrix M = Matrix::Identity(2, 2);
    M(1, 1) = 0.2;
    const SupportSet T0({0});
    // h = (1, t), |t| <= 1: min (1 + 0.2 t^2) / (1 + t^2) at t = 1.
    EXPECT_NEAR(restricted_eigenvalue(M, T0, quick()).value, std::sqrt(0.6), 1e-6);
    EXPECT_NEAR(compatibility_factor(M, T0, quick()).value, std::sqrt(1.0), 1e-6);
}

TEST(Factors, NearlySingularDirectionInsideTheCone) {
    const double eps = 1e-6;
    Matrix M = Matrix::Identity(2, 2);
    M(1, 1) = eps;
    const SupportSet T0({1});
    EXPECT_NEAR(restricted_eigenvalue(M, T0, quick()).value, std::sqrt(eps), 1e-6);
    EXPECT_NEAR(compatibility_factor(M, T0, quick()).value, std::sqrt(eps), 1e-6);
}

TEST(Factors, ZeroMatrix) {
    const Matrix Z = Matrix::Zero(5, 5);
    const SupportSet T0 = SupportSet::first(2);
    EXPECT_EQ(compatibility_factor(Z, T0, quick()).value, 0.0);
    EXPECT_EQ(restricted_eigenvalue(Z, T0, quick()).value, 0.0);
    EXPECT_EQ(weak_cone_invertibility_factor(Z, T0, 2.0, quick()).value, 0.0);
}

TEST(Factors, CompatibilityMatchesConvexSolverReference) {
    // Values from an independent conic solver, minimizing S h'Mh per sign pattern over {s'h_T0 = 1, ||h_Tc||_1 <= 1}.
    const SupportSet T0({0, 1});
    const std::vector<std::pair<std::vector<double>, double>> cases{
        {{0.6547348644624328, 0.096682710467006, -0.05352928563936469, -0.00517114890828168, 1.4429768871344713,
          0.2893197308238267, -0.8648511630568393, 0.1471083318582666, -0.00237798275778974, 0.98327066695957},
         0.5167366847599472},
        {{0.8175791863843743, 0.46707837296809823, -0.3333618946999839, 0.6015624514531428, 0.5270742372264183,
          -0.4260130823981268, 0.25610285537163796, 1.5839967294204926, -0.01157923761835913, 0.9136449428569348},
         0.37000017271853225},
        {{0.9344536357306222, 0.00406201107628472, 0.45056948028548094, 0.10754425620052456, 0.43219906643080735,
          0.16175224008924963, 0.24195034885759628, 1.2292264346509973, 0.11740016061722343, 0.4297285866962635},
         0.585972444800673},
    };
    for (const auto& [upper, kappa] : cases) {
        const Matrix M = symmetric_from_upper(upper, 4);
        EXPECT_NEAR(compatibility_factor(M, T0, quick()).value, kappa, 1e-5);
    }
}

TEST(Factors, DescentAgreesWithDenseOracleOnSmallProblems) {
    Rng rng = make_rng(61);
    for (int k = 0; k < 5; ++k) {
        const Matrix M = oracle::random_psd(rng, 4, 8);
        const auto est = compatibility_factor(M, SupportSet::first(2), quick());
        EXPECT_LE(est.descent_value, est.oracle_value + 1e-9);
    }
}

// -----------------------------------------------------------------------------
// Invariants
// -----------------------------------------------------------------------------

TEST(FactorProperties, ScaleEquivariance) {
    Rng rng = make_rng(63);
    const Matrix M = oracle::random_psd(rng, 6, 30);
    const SupportSet T0 = SupportSet::first(2);
    const double c = 3.7;
    const auto o = quick();
    EXPECT_NEAR(compatibility_factor(c * M, T0, o).value, std::sqrt(c) * compatibility_factor(M, T0, o).value, 1e-6);
    EXPECT_NEAR(restricted_eigenvalue(c * M, T0, o).value, std::sqrt(c) * restricted_eigenvalue(M, T0, o).value, 1e-6);
    // The phi search is nonconvex across supersets, so only agreement to a small relative error is expected.
    const double phi = phi_2s(M, T0, o).value;
    EXPECT_NEAR(phi_2s(c * M, T0, o).value, std::sqrt(c) * phi, 5e-3 * std::sqrt(c) * phi);
    EXPECT_NEAR(weak_cone_invertibility_factor(c * M, T0, 2.0, o).value,
                c * weak_cone_invertibility_factor(M, T0, 2.0, o).value, 1e-6);
}

TEST(FactorProperties, PermutationEquivariance) {
    Rng rng = make_rng(65);
    const int p = 6;
    const Matrix M = oracle::random_psd(rng, p, 30);
    std::vector<int> perm(p);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix P = Matrix::Zero(p, p);
    for (int i = 0; i < p; ++i) P(perm[i], i) = 1.0;  // coordinate i moves to perm[i]
    const Matrix MP = P * M * P.transpose();
    const SupportSet T0({0, 1});
    const SupportSet T0p({perm[0], perm[1]});
    const auto o = quick();
    EXPECT_NEAR(compatibility_factor(M, T0, o).value, compatibility_factor(MP, T0p, o).value, 1e-6);
    EXPECT_NEAR(restricted_eigenvalue(M, T0, o).value, restricted_eigenvalue(MP, T0p, o).value, 1e-6);
    EXPECT_NEAR(weak_cone_invertibility_factor(M, T0, 1.0, o).value,
                weak_cone_invertibility_factor(MP, T0p, 1.0, o).value, 1e-6);
}

TEST(FactorProperties, NoConeSampleBeatsTheReportedInfimum) {
    Rng rng = make_rng(67);
    const int p = 7;
    const Matrix M = oracle::random_psd(rng, p, 12);
    const SupportSet T0({1, 4});
    const auto o = quick();
    const double kappa = compatibility_factor(M, T0, o).value;
    const double re = restricted_eigenvalue(M, T0, o).value;
    const double f2 = weak_cone_invertibility_factor(M, T0, 2.0, o).value;
    for (int k = 0; k < 20000; ++k) {
        const Vector h = cone_sample(rng, T0, p);
        ASSERT_TRUE(in_cone(T0, h, 1e-12));
        EXPECT_GE(compatibility_ratio(M, T0, h), kappa - 1e-9);
        EXPECT_GE(restricted_eigen_ratio(M, h), re - 1e-9);
        EXPECT_GE(weak_cone_ratio(M, T0, 2.0, h), f2 - 1e-9);
    }
}

TEST(FactorProperties, OrderingBetweenFactors) {
    // RE <= kappa <= 2 sqrt(S) RE, phi <= kappa, and F_q >= S^{1/q - 1} kappa^2 / 2 hold for every PSD matrix.
    Rng rng = make_rng(69);
    const auto o = quick();
    for (int k = 0; k < 6; ++k) {
        const int p = 6;
        const Matrix M = oracle::random_psd(rng, p, k % 2 == 0 ? 8 : 60);
        const SupportSet T0 = SupportSet::first(2);
        const double S = 2.0;
        const double kappa = compatibility_factor(M, T0, o).value;
        const double re = restricted_eigenvalue(M, T0, o).value;
        const double phi = phi_2s(M, T0, o).value;
        EXPECT_LE(re, kappa + 1e-6);
        EXPECT_LE(kappa, 2.0 * std::sqrt(S) * re + 1e-6);
        EXPECT_LE(phi, kappa + 1e-6);
        for (double q : {1.0, 2.0, 4.0}) {
            const double fq = weak_cone_invertibility_factor(M, T0, q, o).value;
            EXPECT_GE(fq, std::pow(S, 1.0 / q - 1.0) * kappa * kappa / 2.0 - 1e-6);
        }
    }
}

TEST(FactorProperties, DeterministicForFixedSeed) {
    Rng rng = make_rng(71);
    const Matrix M = oracle::random_psd(rng, 6, 10);
    const SupportSet T0 = SupportSet::first(2);
    const auto a = compatibility_factor(M, T0, quick());
    const auto b = compatibility_factor(M, T0, quick());
    EXPECT_EQ(a.value, b.value);
    EXPECT_TRUE(a.best_h == b.best_h);
}

// -----------------------------------------------------------------------------
// Subset constants
// -----------------------------------------------------------------------------

TEST(SubsetConstants, EquicorrelationClosedForms) {
    const double rho = 0.1;
    const Matrix M = equicorrelation(9, rho);
    for (int N = 1; N <= 6; ++N) {
        const auto d = restricted_isometry(M, N);
        EXPECT_TRUE(d.exact);
        EXPECT_EQ(d.examined, d.total);
        EXPECT_NEAR(d.value, N == 1 ? 0.0 : std::max((N - 1) * rho, rho), 1e-12);
    }
    EXPECT_NEAR(restricted_orthogonality(M, 2, 4).value, rho * std::sqrt(8.0), 1e-12);
    const int S = 3;
    EXPECT_NEAR(uup_margin(M, S), 1.0 - (2 * S - 1) * rho - rho * std::sqrt(2.0 * S * S), 1e-12);
}

TEST(SubsetConstants, IdentityAndMonotonicity) {
    EXPECT_EQ(restricted_isometry(Matrix::Identity(6, 6), 3).value, 0.0);
    EXPECT_EQ(restricted_orthogonality(Matrix::Identity(6, 6), 2, 3).value, 0.0);
    EXPECT_EQ(uup_margin(Matrix::Identity(6, 6), 2), 1.0);
    Rng rng = make_rng(73);
    const Matrix M = oracle::random_psd(rng, 8, 40);
    double prev = 0.0;
    for (int N = 1; N <= 8; ++N) {
        const double d = restricted_isometry(M, N).value;
        EXPECT_GE(d, prev - 1e-12);
        prev = d;
    }
    EXPECT_LE(restricted_orthogonality(M, 1, 2).value, restricted_orthogonality(M, 2, 3).value + 1e-12);
}

TEST(SubsetConstants, BudgetAndSampling) {
    const Matrix M = Matrix::Identity(30, 30);
    SubsetOptions o;
    o.budget = 100;
    EXPECT_THROW(restricted_isometry(M, 5, o), ConfigError);
    o.sampled = true;
    o.samples = 500;
    const auto d = restricted_isometry(M, 5, o);
    EXPECT_FALSE(d.exact);
    EXPECT_EQ(d.total, 142506);
    EXPECT_GT(d.coverage(), 0.0);
    EXPECT_LT(d.coverage(), 1.0);
}

TEST(SubsetConstants, SupNormDiff) {
    Matrix A = Matrix::Zero(3, 3);
    Matrix B = A;
    B(2, 1) = -0.25;
    EXPECT_EQ(sup_norm_diff(A, B), 0.25);
    EXPECT_THROW(sup_norm_diff(A, Matrix::Zero(2, 2)), ConfigError);
}

// -----------------------------------------------------------------------------
// Population surrogate
// -----------------------------------------------------------------------------

namespace {

SimConfig population_config() {
    SimConfig c;
    c.n = 100;
    c.p = 5;
    c.s = 2;
    c.beta0_values = {1.0, -1.0};
    c.seed = 81;
    return c;
}

}  // namespace

TEST(Population, SingleReplicateIsTheEmpiricalInformation) {
    const SimConfig c = population_config();
    const auto pop = population_matrix(c, c.beta0(), 1000, 1);
    SimConfig big = c;
    big.n = 1000;
    const Matrix J = evaluate(simulate_replication(big, 0, kPopulationStream), c.beta0()).hessian;
    EXPECT_EQ(sup_norm_diff(pop.matrix, J), 0.0);
    EXPECT_EQ(pop.stderr_sup, 0.0);
}

TEST(Population, ConstantCovariatesGiveZeroInformation) {
    SimConfig c = population_config();
    c.covariate_law = ConstantCovariates{0.4};
    const auto pop = population_matrix(c, c.beta0(), 1000, 2);
    EXPECT_LE(pop.matrix.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Population, StandardErrorShrinksWithReplicates) {
    const SimConfig c = population_config();
    const auto few = population_matrix(c, c.beta0(), 1000, 4);
    const auto many = population_matrix(c, c.beta0(), 1000, 16);
    check_symmetric_psd(many.matrix);
    // Four times the replicates halves the standard error; allow a factor of two either way.
    const double ratio = few.stderr_sup / many.stderr_sup;
    EXPECT_GT(ratio, 1.0);
    EXPECT_LT(ratio, 4.0);
}

// -----------------------------------------------------------------------------
// Errors and report
// -----------------------------------------------------------------------------

TEST(FactorErrors, RejectsBadInputs) {
    const Matrix I = Matrix::Identity(4, 4);
    Matrix nonsym = I;
    nonsym(0, 1) = 0.5;
    Matrix indefinite = I;
    indefinite(3, 3) = -1.0;
    EXPECT_THROW(compatibility_factor(nonsym, SupportSet::first(1)), ConfigError);
    EXPECT_THROW(compatibility_factor(indefinite, SupportSet::first(1)), ConfigError);
    EXPECT_THROW(compatibility_factor(I, SupportSet({7})), ConfigError);
    EXPECT_THROW(compatibility_factor(I, SupportSet{}), ConfigError);
    EXPECT_THROW(weak_cone_invertibility_factor(I, SupportSet::first(1), 0.5), ConfigError);
    EXPECT_THROW(phi_2s(I, SupportSet::first(3)), ConfigError);
    EXPECT_THROW(uup_margin(I, 2), ConfigError);
    EXPECT_THROW(SupportSet::from_one_based({0, 2}), ConfigError);
    EXPECT_THROW(population_matrix(population_config(), Vector::Zero(5), 500, 1), ConfigError);
}

TEST(FactorErrors, PhiSupersetBudget) {
    FactorOptions o = quick();
    EXPECT_THROW(phi_2s(Matrix::Identity(60, 60), SupportSet::first(4), o), ConfigError);
}

TEST(FactorReportTest, CollectsEverything) {
    Rng rng = make_rng(75);
    const Matrix M = oracle::random_psd(rng, 6, 60);
    FactorReportOptions o;
    o.factor = quick();
    const auto rep = factor_report(M, SupportSet::first(2), o);
    EXPECT_EQ(rep.f_q.size(), 4u);  // 1, 2, 4 and the surrogate for infinity
    EXPECT_TRUE(rep.phi_2s.has_value());
    EXPECT_TRUE(rep.uup_margin.has_value());
    EXPECT_LE(rep.kappa.value, compatibility_factor(M, SupportSet::first(2), o.factor).value + 1e-12);
    const nlohmann::json j = rep;
    EXPECT_TRUE(j.contains("kappa"));
    EXPECT_TRUE(j.contains("f_q"));
}
