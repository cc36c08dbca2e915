#ifndef BCHAR_VOLUME_MATRIX_HPP
#define BCHAR_VOLUME_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "balls.hpp"
#include "errors.hpp"
#include "flow.hpp"
#include "halo.hpp"
#include "mesh.hpp"

namespace bchar {

/// Sparse matrix of approximate porous intersection volumes
/// a_ij ~ |F_{-dt}(K_i) cap M_j|_phi, stored as row-major sorted COO with
/// CSR row ranges and a per-column adjacency. The sparsity pattern is
/// fixed after construction; rebalancing and the min-norm adjustment only
/// rescale existing nonzeros.
///
/// Rows [0, n_c) are the tracked real cells and carry local-conservation
/// targets b_loc. Rows >= n_c, when present, are halo cells outside the
/// domain whose trace-back deposits mass into real cells; they carry no
/// row constraint (the inflow/outflow situation where characteristics
/// cross the boundary). Columns are always the n_c real resident cells.
struct VolumeMatrix {
    int n_c = 0;    // resident (column) cells, also the constrained rows
    int n_rows = 0; // n_c plus any halo rows
    std::vector<int> row;  // per nonzero, sorted by (row, col)
    std::vector<int> col;
    std::vector<double> val;
    std::vector<int> row_ptr;                   // size n_rows+1
    std::vector<std::vector<int>> col_entries;  // entry indices per column
    std::vector<double> b_loc;  // row targets, size n_c; reduced by any
                                // mass frozen into halo columns
    std::vector<double> b_glob; // column targets |M_j|_phi

    // Frozen inflow deposits: tracked volume that left the domain and
    // carries the zero-gradient boundary extension of the concentration.
    // inflow_col is the nearest real cell to the halo cell that received
    // the deposit; these entries are outside the conservation constraints
    // (their mass enters the ledger as inflow).
    std::vector<int> inflow_row;
    std::vector<int> inflow_col;
    std::vector<double> inflow_val;

    int nnz() const { return (int)val.size(); }
    bool has_halo_rows() const { return n_rows > n_c; }

    void build_adjacency() {
        row_ptr.assign(n_rows + 1, 0);
        for (int r : row) row_ptr[r + 1]++;
        for (int i = 0; i < n_rows; ++i) row_ptr[i + 1] += row_ptr[i];
        col_entries.assign(n_c, {});
        for (int k = 0; k < nnz(); ++k) col_entries[col[k]].push_back(k);
    }

    std::vector<double> row_sums() const {
        std::vector<double> s(n_rows, 0.0);
        for (int k = 0; k < nnz(); ++k) s[row[k]] += val[k];
        return s;
    }

    std::vector<double> col_sums() const {
        std::vector<double> s(n_c, 0.0);
        for (int k = 0; k < nnz(); ++k) s[col[k]] += val[k];
        return s;
    }

    /// Max over constrained rows and columns of |sum - target| / target.
    double balance_error() const {
        const auto rs = row_sums();
        const auto cs = col_sums();
        double e = 0;
        for (int i = 0; i < n_c; ++i) {
            if (b_loc[i] > 0)
                e = std::max(e, std::abs(rs[i] - b_loc[i]) / b_loc[i]);
            if (b_glob[i] > 0)
                e = std::max(e, std::abs(cs[i] - b_glob[i]) / b_glob[i]);
        }
        return e;
    }
};

/// Initial approximation V_{K_hat,M}: for each tracked ball, intersection
/// masses against resident balls are normalized into mass fractions and
/// the ball's porous volume is deposited accordingly. Row sums equal the
/// tracked-cell porous volumes by construction.
///
/// The `candidates` callback exists so tests can substitute a brute-force
/// all-pairs scan for the bounding-box neighbor filter.
template <int D>
VolumeMatrix build_initial_matrix(
    const BallCloud<D>& cloud, const TrackedCloud<D>& tracked,
    const Mesh<D>& mesh,
    const std::function<std::vector<int>(const Ball<D>&)>& candidates = {}) {
    const int nc = mesh.cell_count();
    std::vector<std::map<int, double>> rows((size_t)nc);
    const int nb = cloud.ball_count();
    for (int i = 0; i < nb; ++i) {
        const TrackedBall<D>& tb = tracked.balls[(size_t)i];
        const Ball<D> query{tb.center, tb.radius};
        const std::vector<int> cand =
            candidates ? candidates(query) : cloud.neighbor_candidates(query);
        // raw weights rho_M phi_M |B_hat cap B_{M,m}|, ascending flat order
        double total = 0;
        std::vector<std::pair<int, double>> weights;
        for (int j : cand) {
            const double v = ball_intersection_volume<D>(query, cloud.ball(j));
            if (v <= 0.0) continue;
            const int M = cloud.cell_of(j);
            const double w = cloud.rho(M) * mesh.porosity(M) * v;
            weights.emplace_back(M, w);
            total += w;
        }
        if (weights.empty() || total <= 0.0)
            throw Error("build_initial_matrix: ball (cell " +
                        std::to_string(tb.cell) + ", slot " +
                        std::to_string(tb.slot) +
                        ") tracked into void: it intersects no resident ball; "
                        "use more balls per cell or a smaller time step");
        const double mass = cloud.rho(tb.cell) * tb.equiv_porosity *
                            ball_volume<D>(tb.radius);
        auto& r = rows[(size_t)tb.cell];
        for (const auto& [M, w] : weights) r[M] += mass * (w / total);
    }

    VolumeMatrix m;
    m.n_c = nc;
    m.n_rows = nc;
    for (int i = 0; i < nc; ++i) {
        for (const auto& [j, v] : rows[(size_t)i]) {
            m.row.push_back(i);
            m.col.push_back(j);
            m.val.push_back(v);
        }
    }
    m.build_adjacency();
    m.b_loc = tracked.cell_volume;
    m.b_glob.resize(nc);
    for (int j = 0; j < nc; ++j) {
        m.b_glob[j] = mesh.porous_volume(j);
        if (m.col_entries[j].empty())
            throw Error("build_initial_matrix: resident cell " +
                        std::to_string(j) +
                        " received no mass (empty column); use more balls per "
                        "cell or a smaller time step");
    }
    return m;
}

/// Initial approximation on an enlarged lattice for steps whose
/// characteristics cross the domain boundary. Columns are the real cells.
/// Rows [0, n_c) are the real tracked cells; mass they deposit into halo
/// cells is frozen as outflow and subtracted from their local target.
/// Halo cells whose trace-back deposits into real cells become extra
/// unconstrained rows (inflow carriers constrained only through the
/// column targets). Halo-to-halo deposits are dropped.
template <int D>
VolumeMatrix build_initial_matrix(const BallCloud<D>& ext_cloud,
                                  const TrackedCloud<D>& ext_tracked,
                                  const HaloWorld<D>& halo) {
    const Mesh<D>& ext_mesh = ext_cloud.mesh();
    const Mesh<D>& real_mesh = halo.real_mesh();
    const int nc = real_mesh.cell_count();
    std::vector<std::map<int, double>> real_rows((size_t)nc);
    std::vector<double> lost((size_t)nc, 0.0);
    std::vector<std::map<int, double>> inflow((size_t)nc);
    std::map<int, std::map<int, double>> halo_rows; // keyed by extended cell

    const int nb = ext_cloud.ball_count();
    for (int i = 0; i < nb; ++i) {
        const TrackedBall<D>& tb = ext_tracked.balls[(size_t)i];
        const int src_real = halo.ext_to_real(tb.cell);
        const Ball<D> query{tb.center, tb.radius};
        double total = 0;
        std::vector<std::pair<int, double>> weights;
        for (int j : ext_cloud.neighbor_candidates(query)) {
            const double v =
                ball_intersection_volume<D>(query, ext_cloud.ball(j));
            if (v <= 0.0) continue;
            const int M = ext_cloud.cell_of(j);
            const double w = ext_cloud.rho(M) * ext_mesh.porosity(M) * v;
            weights.emplace_back(M, w);
            total += w;
        }
        if (weights.empty() || total <= 0.0) {
            if (src_real < 0) continue; // halo ball fully outside play
            throw Error("build_initial_matrix: ball (cell " +
                        std::to_string(src_real) + ", slot " +
                        std::to_string(tb.slot) +
                        ") tracked into void: it intersects no resident ball; "
                        "use more balls per cell or a smaller time step");
        }
        const double mass = ext_cloud.rho(tb.cell) * tb.equiv_porosity *
                            ball_volume<D>(tb.radius);
        for (const auto& [M, w] : weights) {
            const double amount = mass * (w / total);
            const int dst_real = halo.ext_to_real(M);
            if (src_real >= 0) {
                if (dst_real >= 0) {
                    real_rows[(size_t)src_real][dst_real] += amount;
                } else {
                    lost[(size_t)src_real] += amount;
                    // inflow: the entering fluid carries the zero-gradient
                    // extension of the concentration, i.e. the value of
                    // the real cell nearest to the halo donor
                    const int near = *real_mesh.locate(
                        real_mesh.clamp_to_domain(ext_mesh.cell_center(M)));
                    inflow[(size_t)src_real][near] += amount;
                }
            } else if (dst_real >= 0) {
                halo_rows[tb.cell][dst_real] += amount;
            }
        }
    }

    VolumeMatrix m;
    m.n_c = nc;
    m.n_rows = nc + (int)halo_rows.size();
    for (int i = 0; i < nc; ++i) {
        for (const auto& [j, v] : real_rows[(size_t)i]) {
            m.row.push_back(i);
            m.col.push_back(j);
            m.val.push_back(v);
        }
    }
    int next_row = nc;
    for (const auto& [ext, entries] : halo_rows) {
        for (const auto& [j, v] : entries) {
            m.row.push_back(next_row);
            m.col.push_back(j);
            m.val.push_back(v);
        }
        ++next_row;
    }
    m.build_adjacency();
    for (int i = 0; i < nc; ++i) {
        for (const auto& [j, v] : inflow[(size_t)i]) {
            m.inflow_row.push_back(i);
            m.inflow_col.push_back(j);
            m.inflow_val.push_back(v);
        }
    }
    m.b_loc.resize((size_t)nc);
    for (int i = 0; i < nc; ++i)
        m.b_loc[(size_t)i] = std::max(
            0.0, ext_tracked.cell_volume[(size_t)halo.real_to_ext(i)] -
                     lost[(size_t)i]);
    m.b_glob.resize((size_t)nc);
    for (int j = 0; j < nc; ++j) {
        m.b_glob[(size_t)j] = real_mesh.porous_volume(j);
        if (m.col_entries[(size_t)j].empty())
            throw Error("build_initial_matrix: resident cell " +
                        std::to_string(j) +
                        " received no mass (empty column); use more balls per "
                        "cell or a smaller time step");
    }
    return m;
}

/// One mass-rebalancing iteration: scale each column to its target
/// |M_j|_phi, then each constrained row to its target. Row sums are exact
/// afterwards; column-sum error is redistributed and reduced.
inline void scaling_iteration(VolumeMatrix& m) {
    const auto cs = m.col_sums();
    for (int j = 0; j < m.n_c; ++j) {
        if (!(cs[j] > 0.0))
            throw Error("scaling_iteration: zero column sum in column " +
                        std::to_string(j));
        const double s = m.b_glob[j] / cs[j];
        for (int k : m.col_entries[j]) m.val[k] *= s;
    }
    const auto rs = m.row_sums();
    for (int i = 0; i < m.n_c; ++i) {
        if (!(rs[i] > 0.0)) continue; // empty constrained row (target 0)
        const double s = m.b_loc[i] / rs[i];
        for (int k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) m.val[k] *= s;
    }
}

struct RebalanceResult {
    int iterations = 0;
    double error = 0; // achieved max relative mass-balance error
};

/// Applies up to `max_iters` scaling iterations, stopping early once the
/// max relative mass-balance error drops to `stop_tol`.
inline RebalanceResult rebalance(VolumeMatrix& m, int max_iters = 10,
                                 double stop_tol = 0.05) {
    RebalanceResult res;
    res.error = m.balance_error();
    while (res.iterations < max_iters && res.error > stop_tol) {
        scaling_iteration(m);
        ++res.iterations;
        res.error = m.balance_error();
    }
    return res;
}

} // namespace bchar

#endif
