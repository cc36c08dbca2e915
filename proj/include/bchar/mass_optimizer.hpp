#ifndef BCHAR_MASS_OPTIMIZER_HPP
#define BCHAR_MASS_OPTIMIZER_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "errors.hpp"
#include "volume_matrix.hpp"

namespace bchar {

/// Staggered constraint system A_hat (1+x) = [b_loc; b_glob] over the n_z
/// nonzeros of the rebalanced volume matrix. Unknown k corresponds to the
/// k-th nonzero in row-major order (the staggered-row construction);
/// A_hat row i holds the nonzeros of matrix row i, row n_c+j those of
/// column j, so A_hat * ones = [row sums; column sums]. Nonzeros living
/// in halo rows (matrix row >= n_c) appear only in their column
/// constraint.
struct ConstraintSystem {
    int n_c = 0;
    bool has_halo = false; // some unknowns lack a row constraint
    std::vector<int> row;  // colmap: unknown k -> (row[k], col[k])
    std::vector<int> col;
    std::vector<double> a; // nonzero values of A^(N)
    std::vector<double> b; // [b_loc; b_glob], length 2*n_c

    int n_z() const { return (int)a.size(); }

    /// y = A_hat * v, length 2*n_c.
    std::vector<double> apply(const std::vector<double>& v) const {
        std::vector<double> y(2 * (size_t)n_c, 0.0);
        for (int k = 0; k < n_z(); ++k) {
            if (row[k] < n_c) y[row[k]] += a[k] * v[k];
            y[(size_t)n_c + col[k]] += a[k] * v[k];
        }
        return y;
    }

    /// v = A_hat^T * y, length n_z.
    std::vector<double> apply_transpose(const std::vector<double>& y) const {
        std::vector<double> v((size_t)n_z());
        for (int k = 0; k < n_z(); ++k) {
            const double rpart = row[k] < n_c ? y[row[k]] : 0.0;
            v[k] = a[k] * (rpart + y[(size_t)n_c + col[k]]);
        }
        return v;
    }

    /// Relative infinity-norm residual of A_hat (1+x) = b.
    double residual(const std::vector<double>& x) const {
        std::vector<double> ones_plus((size_t)n_z());
        for (int k = 0; k < n_z(); ++k) ones_plus[k] = 1.0 + x[k];
        const auto y = apply(ones_plus);
        double num = 0, den = 0;
        for (size_t i = 0; i < y.size(); ++i) {
            num = std::max(num, std::abs(y[i] - b[i]));
            den = std::max(den, std::abs(b[i]));
        }
        return num / den;
    }
};

inline ConstraintSystem assemble_constraints(const VolumeMatrix& m) {
    ConstraintSystem sys;
    sys.n_c = m.n_c;
    sys.has_halo = m.has_halo_rows();
    sys.row = m.row;
    sys.col = m.col;
    sys.a = m.val;
    sys.b.resize(2 * (size_t)m.n_c);
    for (int i = 0; i < m.n_c; ++i) sys.b[i] = m.b_loc[i];
    for (int j = 0; j < m.n_c; ++j) sys.b[(size_t)m.n_c + j] = m.b_glob[j];
    return sys;
}

struct OptimizerDiagnostics {
    int n_z = 0;
    double residual = 0;   // achieved relative equality residual
    double max_abs_x = 0;
    int solves = 0; // linear solves against the factorized normal equations
    int projection_iterations = 0;
};

namespace detail {

/// Direct solver for the normal equations (A_hat A_hat^T) y = r. Two
/// constraints couple exactly when they share a nonzero, so the Gram
/// matrix is as sparse as the volume matrix itself and a sparse Cholesky
/// factorization is cheap. The factorization depends only on A_hat, so
/// it is built once and reused for every projection onto the affine set.
///
/// The full system is rank-deficient: within each connected component of
/// the constraint graph whose unknowns all carry both a row and a column
/// constraint, the row-sum equations already imply one column-sum
/// equation ([1; -1] restricted to the component is a null vector). One
/// column constraint per such component is dropped, along with any
/// constraint that touches no nonzero, which restores full rank.
class NormalEquations {
  public:
    explicit NormalEquations(const ConstraintSystem& sys) : n_c_(sys.n_c) {
        const int n = 2 * n_c_;
        // Union-find over constraints; a halo unknown (no row constraint)
        // anchors its component, so no constraint is dropped there.
        std::vector<int> parent(n);
        for (int i = 0; i < n; ++i) parent[i] = i;
        std::vector<char> touched((size_t)n, 0);
        std::vector<char> anchored((size_t)n, 0);
        auto find = [&](int i) {
            while (parent[i] != i) i = parent[i] = parent[parent[i]];
            return i;
        };
        for (int k = 0; k < sys.n_z(); ++k) {
            const int ci = n_c_ + sys.col[k];
            touched[(size_t)ci] = 1;
            if (sys.row[k] < n_c_) {
                touched[(size_t)sys.row[k]] = 1;
                parent[find(sys.row[k])] = find(ci);
            } else {
                anchored[(size_t)find(ci)] = 1;
            }
        }
        for (int i = 0; i < n; ++i)
            if (anchored[(size_t)i] && find(i) != i)
                anchored[(size_t)find(i)] = 1;

        // Keep every touched constraint except one column constraint per
        // unanchored component (first column index wins).
        std::vector<char> dropped((size_t)n, 0);
        std::vector<char> component_done((size_t)n, 0);
        for (int j = n_c_; j < n; ++j) {
            if (!touched[(size_t)j]) continue;
            const int root = find(j);
            if (anchored[(size_t)root] || component_done[(size_t)root])
                continue;
            dropped[(size_t)j] = 1;
            component_done[(size_t)root] = 1;
        }
        index_.assign((size_t)n, -1);
        m_ = 0;
        for (int i = 0; i < n; ++i)
            if (touched[(size_t)i] && !dropped[(size_t)i])
                index_[(size_t)i] = m_++;

        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(4 * (size_t)sys.n_z());
        for (int k = 0; k < sys.n_z(); ++k) {
            const double a2 = sys.a[k] * sys.a[k];
            const int ri = sys.row[k] < n_c_ ? index_[(size_t)sys.row[k]] : -1;
            const int ci = index_[(size_t)(n_c_ + sys.col[k])];
            if (ri >= 0) {
                trip.emplace_back(ri, ri, a2);
                if (ci >= 0) {
                    trip.emplace_back(ri, ci, a2);
                    trip.emplace_back(ci, ri, a2);
                }
            }
            if (ci >= 0) trip.emplace_back(ci, ci, a2);
        }
        Eigen::SparseMatrix<double> gram(m_, m_);
        gram.setFromTriplets(trip.begin(), trip.end());
        chol_.compute(gram);
        if (chol_.info() != Eigen::Success)
            throw Error(
                "solve_min_norm: factorization of the normal equations "
                "failed (degenerate constraint system)");
    }

    /// Solves for y, length 2*n_c; dropped redundant constraints get 0.
    std::vector<double> solve(const std::vector<double>& r) const {
        Eigen::VectorXd rhs(m_);
        for (size_t i = 0; i < index_.size(); ++i)
            if (index_[i] >= 0) rhs[index_[i]] = r[i];
        const Eigen::VectorXd y = chol_.solve(rhs);
        std::vector<double> out(index_.size(), 0.0);
        for (size_t i = 0; i < index_.size(); ++i)
            if (index_[i] >= 0) out[i] = y[index_[i]];
        return out;
    }

  private:
    int n_c_;
    int m_ = 0;
    std::vector<int> index_; // constraint -> reduced index, -1 if dropped
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol_;
};

} // namespace detail

/// Minimal multiplicative adjustment: minimizes x^T x subject to
/// A_hat (1+x) = b and eps <= 1+x_k <= 2. The equality-constrained
/// least-norm solution x = A_hat^T (A_hat A_hat^T)^+ (b - A_hat 1) is
/// computed first; if any box bound is violated, Dykstra-corrected
/// alternating projections between the affine set and the box run until
/// the residual contract is met.
inline std::vector<double> solve_min_norm(const ConstraintSystem& sys,
                                          OptimizerDiagnostics& diag,
                                          double tol = 1e-10,
                                          int max_iters = 20000) {
    const int nz = sys.n_z();
    const int nc = sys.n_c;
    diag.n_z = nz;

    if (!sys.has_halo) {
        // With full row and column constraints the system can only be
        // consistent if both target sets carry the same total mass.
        double sum_loc = 0, sum_glob = 0;
        for (int i = 0; i < nc; ++i) {
            sum_loc += sys.b[i];
            sum_glob += sys.b[(size_t)nc + i];
        }
        if (std::abs(sum_loc - sum_glob) >
            1e-10 * std::max(std::abs(sum_loc), std::abs(sum_glob)))
            throw Error(
                "solve_min_norm: incompatible mass totals (sum of local "
                "targets differs from sum of global targets)");
    }

    const std::vector<double> ones((size_t)nz, 1.0);
    const auto a1 = sys.apply(ones);
    std::vector<double> r(2 * (size_t)nc);
    for (size_t i = 0; i < r.size(); ++i) r[i] = sys.b[i] - a1[i];

    // The factorization depends only on A_hat: build once, reuse for
    // every projection onto the affine set.
    const detail::NormalEquations normal(sys);
    auto project_affine = [&](const std::vector<double>& v) {
        // v + A_hat^T (A_hat A_hat^T)^+ (r - A_hat v)
        const auto av = sys.apply(v);
        std::vector<double> rhs(r.size());
        for (size_t i = 0; i < r.size(); ++i) rhs[i] = r[i] - av[i];
        ++diag.solves;
        const auto y = normal.solve(rhs);
        auto corr = sys.apply_transpose(y);
        std::vector<double> out((size_t)nz);
        for (int k = 0; k < nz; ++k) out[k] = v[k] + corr[k];
        return out;
    };

    constexpr double eps = 1e-12;
    const double x_lo = -1.0 + eps, x_hi = 1.0;
    auto box_violation = [&](const std::vector<double>& x) {
        double v = 0;
        for (double xk : x)
            v = std::max(v, std::max(x_lo - xk, xk - x_hi));
        return v;
    };

    std::vector<double> x = project_affine(std::vector<double>((size_t)nz, 0.0));
    const double v0 = box_violation(x);
    if (v0 > 1.0)
        throw Error("solve_min_norm: affine least-norm point lies far "
                    "outside the scaling bounds (violation " +
                    std::to_string(v0) +
                    "); the box-constrained system is infeasible "
                    "(use more balls per cell or more rebalance iterations)");
    if (v0 > eps) {
        // Dykstra projection of the origin onto (affine set) cap (box).
        // Each round projects onto the affine set; the clamped iterate is
        // accepted as soon as it meets the residual contract. Stagnating
        // residuals signal an infeasible box-constrained system.
        std::vector<double> z((size_t)nz, 0.0), q((size_t)nz, 0.0);
        std::vector<double> clamped((size_t)nz);
        double best = std::numeric_limits<double>::infinity();
        int since_improvement = 0;
        for (int it = 0; it < max_iters; ++it) {
            ++diag.projection_iterations;
            x = project_affine(z);
            for (int k = 0; k < nz; ++k) clamped[k] = std::clamp(x[k], x_lo, x_hi);
            const double res = sys.residual(clamped);
            if (res <= tol) break;
            if (res < 0.99 * best) {
                best = res;
                since_improvement = 0;
            } else if (++since_improvement > 1000) {
                break; // stagnating: infeasible box for this matrix
            }
            std::vector<double> w((size_t)nz);
            for (int k = 0; k < nz; ++k)
                w[k] = std::clamp(x[k] + q[k], x_lo, x_hi);
            for (int k = 0; k < nz; ++k) q[k] = x[k] + q[k] - w[k];
            z = w;
        }
        x = clamped;
    }

    diag.residual = sys.residual(x);
    for (double xk : x) diag.max_abs_x = std::max(diag.max_abs_x, std::abs(xk));
    if (diag.residual > tol)
        throw Error("solve_min_norm: equality residual " +
                    std::to_string(diag.residual) + " above tolerance " +
                    std::to_string(tol) +
                    "; the box-constrained system may be infeasible "
                    "(use more balls per cell or more rebalance iterations)");
    return x;
}

/// Scales each nonzero a_k by (1 + x_k).
inline void apply_adjustment(VolumeMatrix& m, const std::vector<double>& x) {
    if ((int)x.size() != m.nnz())
        throw Error("apply_adjustment: x size does not match nonzero count");
    for (int k = 0; k < m.nnz(); ++k) m.val[k] *= 1.0 + x[k];
}

} // namespace bchar

#endif
