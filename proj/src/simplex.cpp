#include "hazard_dantzig/simplex.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>

namespace hazard_dantzig {

std::string to_string(LpStatus status) {
    switch (status) {
        case LpStatus::Optimal: return "optimal";
        case LpStatus::Infeasible: return "infeasible";
        case LpStatus::Unbounded: return "unbounded";
        case LpStatus::IterationLimit: return "iteration_limit";
    }
    return "unknown";
}

namespace {

class Tableau {
public:
    Tableau(const LpProblem& lp, const SimplexOptions& opts) : opts_(opts) {
        m_ = static_cast<int>(lp.A.rows());
        n_ = static_cast<int>(lp.A.cols());
        std::vector<int> negative_rows;
        for (int i = 0; i < m_; ++i)
            if (lp.b[i] < 0.0) negative_rows.push_back(i);
        k_ = static_cast<int>(negative_rows.size());
        cols_ = n_ + m_ + k_;

        t_ = Matrix::Zero(m_, cols_);
        rhs_ = Vector::Zero(m_);
        basis_.assign(static_cast<std::size_t>(m_), -1);
        t_.leftCols(n_) = lp.A;
        t_.middleCols(n_, m_).setIdentity();
        rhs_ = lp.b;
        int art = n_ + m_;
        for (int i : negative_rows) {
            t_.row(i) *= -1.0;
            rhs_[i] = -rhs_[i];
            t_(i, art) = 1.0;
            basis_[static_cast<std::size_t>(i)] = art++;
        }
        for (int i = 0; i < m_; ++i)
            if (basis_[static_cast<std::size_t>(i)] < 0) basis_[static_cast<std::size_t>(i)] = n_ + i;
    }

    int rows() const { return m_; }
    int structural() const { return n_; }
    int artificials() const { return k_; }
    bool is_artificial(int col) const { return col >= n_ + m_; }
    const std::vector<int>& basis() const { return basis_; }
    const Vector& rhs() const { return rhs_; }
    int pivots() const { return pivots_; }

    /// Runs Bland's rule against the full-length cost vector `cost`.
    LpStatus optimize(const Vector& cost) {
        Vector reduced = cost;
        for (int i = 0; i < m_; ++i) {
            const double cb = cost[basis_[static_cast<std::size_t>(i)]];
            if (cb != 0.0) reduced.noalias() -= cb * t_.row(i).transpose();
        }
        const double scale = 1.0 + cost.cwiseAbs().maxCoeff();
        while (true) {
            int enter = -1;
            for (int j = 0; j < cols_; ++j) {
                if (is_artificial(j)) continue;
                if (reduced[j] < -opts_.cost_tol * scale) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return LpStatus::Optimal;

            int leave = -1;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m_; ++i) {
                const double a = t_(i, enter);
                if (a <= opts_.pivot_tol) continue;
                const double ratio = std::max(rhs_[i], 0.0) / a;
                const bool tie = leave >= 0 && std::abs(ratio - best_ratio) <= 1e-12 * (1.0 + best_ratio);
                if ((!tie && ratio < best_ratio) ||
                    (tie && basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
                    best_ratio = std::min(ratio, best_ratio);
                    leave = i;
                }
            }
            if (leave < 0) return LpStatus::Unbounded;
            if (pivots_ >= opts_.max_pivots) return LpStatus::IterationLimit;
            pivot(leave, enter);
            reduced.noalias() -= reduced[enter] * t_.row(leave).transpose();
            reduced[enter] = 0.0;
        }
    }

    /// Pivots basic artificials (at zero level) out wherever a usable column exists.
    void expel_artificials() {
        for (int i = 0; i < m_; ++i) {
            if (!is_artificial(basis_[static_cast<std::size_t>(i)])) continue;
            int best = -1;
            double mag = opts_.pivot_tol;
            for (int j = 0; j < n_ + m_; ++j) {
                if (std::abs(t_(i, j)) > mag) {
                    mag = std::abs(t_(i, j));
                    best = j;
                }
            }
            if (best >= 0) pivot(i, best);
        }
    }

    double artificial_sum() const {
        double s = 0.0;
        for (int i = 0; i < m_; ++i)
            if (is_artificial(basis_[static_cast<std::size_t>(i)])) s += std::abs(rhs_[i]);
        return s;
    }

    /// Original column (of [A I], artificials as +/- unit vectors) for refinement.
    Vector original_column(const LpProblem& lp, int col) const {
        if (col < n_) return lp.A.col(col);
        Vector e = Vector::Zero(m_);
        if (col < n_ + m_) {
            e[col - n_] = 1.0;
        } else {
            // Artificial for negated row r appears with coefficient -1 in original orientation.
            int which = col - n_ - m_;
            int seen = 0;
            for (int r = 0; r < m_; ++r) {
                if (lp.b[r] < 0.0) {
                    if (seen == which) {
                        e[r] = -1.0;
                        break;
                    }
                    ++seen;
                }
            }
        }
        return e;
    }

private:
    void pivot(int row, int col) {
        ++pivots_;
        const double piv = t_(row, col);
        t_.row(row) /= piv;
        rhs_[row] /= piv;
        for (int i = 0; i < m_; ++i) {
            if (i == row) continue;
            const double f = t_(i, col);
            if (f == 0.0) continue;
            t_.row(i).noalias() -= f * t_.row(row);
            rhs_[i] -= f * rhs_[row];
            t_(i, col) = 0.0;
        }
        t_(row, col) = 1.0;
        basis_[static_cast<std::size_t>(row)] = col;
    }

    SimplexOptions opts_;
    int m_ = 0, n_ = 0, k_ = 0, cols_ = 0;
    Matrix t_;
    Vector rhs_;
    std::vector<int> basis_;
    int pivots_ = 0;
};

}  // namespace

LpSolution solve_lp(const LpProblem& lp, const SimplexOptions& options) {
    const auto m = lp.A.rows();
    const auto n = lp.A.cols();
    if (lp.b.size() != m || lp.c.size() != n) throw ConfigError("LP dimensions are inconsistent");
    if (!lp.A.allFinite() || !lp.b.allFinite() || !lp.c.allFinite()) throw ConfigError("LP data must be finite");

    LpSolution sol;
    Tableau tab(lp, options);
    const int cols = static_cast<int>(n + m) + tab.artificials();

    if (tab.artificials() > 0) {
        Vector phase1 = Vector::Zero(cols);
        phase1.tail(tab.artificials()).setOnes();
        const LpStatus st = tab.optimize(phase1);
        sol.pivots = tab.pivots();
        if (st == LpStatus::IterationLimit) {
            sol.status = st;
            return sol;
        }
        const double bscale = 1.0 + lp.b.cwiseAbs().maxCoeff();
        if (tab.artificial_sum() > options.feasibility_tol * bscale) {
            sol.status = LpStatus::Infeasible;
            return sol;
        }
        tab.expel_artificials();
    }

    Vector phase2 = Vector::Zero(cols);
    phase2.head(n) = lp.c;
    sol.status = tab.optimize(phase2);
    sol.pivots = tab.pivots();
    sol.basis = tab.basis();
    if (sol.status != LpStatus::Optimal) return sol;

    // Recompute primal and dual values from the basis on the original data.
    Matrix B(m, m);
    Vector cb(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const int col = tab.basis()[static_cast<std::size_t>(i)];
        B.col(i) = tab.original_column(lp, col);
        cb[i] = col < n ? lp.c[col] : 0.0;
    }
    Eigen::PartialPivLU<Matrix> lu(B);
    const Vector xb = lu.solve(lp.b);
    sol.dual = lu.transpose().solve(cb);

    sol.x = Vector::Zero(n);
    for (Eigen::Index i = 0; i < m; ++i) {
        const int col = tab.basis()[static_cast<std::size_t>(i)];
        if (col < n) sol.x[col] = xb[i];
    }
    if (!sol.x.allFinite() || !sol.dual.allFinite()) {
        // Ill-conditioned basis: fall back to the tableau values.
        sol.x.setZero();
        for (Eigen::Index i = 0; i < m; ++i) {
            const int col = tab.basis()[static_cast<std::size_t>(i)];
            if (col < n) sol.x[col] = tab.rhs()[i];
        }
        sol.dual = Vector::Zero(m);
    }
    sol.x = sol.x.cwiseMax(0.0);

    sol.objective = lp.c.dot(sol.x);
    sol.dual_objective = lp.b.dot(sol.dual);
    sol.duality_gap = std::abs(sol.objective - sol.dual_objective);
    const Vector slack = lp.b - lp.A * sol.x;
    sol.primal_residual = m > 0 ? std::max(0.0, -slack.minCoeff()) : 0.0;
    const Vector reduced = lp.c - lp.A.transpose() * sol.dual;
    double dual_res = n > 0 ? std::max(0.0, -reduced.minCoeff()) : 0.0;
    if (m > 0) dual_res = std::max(dual_res, sol.dual.maxCoeff());
    sol.dual_residual = dual_res;
    return sol;
}

}  // namespace hazard_dantzig
