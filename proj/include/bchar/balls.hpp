#ifndef BCHAR_BALLS_HPP
#define BCHAR_BALLS_HPP

#include <algorithm>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "mesh.hpp"

namespace bchar {

/// Static per-cell packing of disjoint balls. Each cell holds a regular
/// m[0] x ... x m[D-1] grid of equal-radius balls, strictly inside the cell,
/// plus a porous density rho_K distributing the cell's porous volume over
/// its balls: rho_K * sum_s |B_{K,s}|_phi = |K|_phi.
template <int D>
class BallCloud {
public:
    /// alpha in (0,1] is the packing fraction: the common radius is
    /// alpha * min_k(h_k / m_k) / 2, so alpha < 1 keeps balls strictly
    /// disjoint and strictly inside the cell.
    BallCloud(const Mesh<D>& mesh, const std::array<int, D>& balls_per_axis,
              double alpha = 0.98)
        : mesh_(&mesh), balls_per_axis_(balls_per_axis) {
        per_cell_ = 1;
        for (int k = 0; k < D; ++k) {
            if (balls_per_axis[k] < 1)
                throw Error("ball packing: balls_per_axis[" + std::to_string(k) +
                            "] must be >= 1");
            per_cell_ *= balls_per_axis[k];
        }
        if (!(alpha > 0.0 && alpha <= 1.0))
            throw Error("ball packing: alpha must be in (0,1]");
        const Vec<D>& h = mesh.cell_size();
        double sub = h[0] / balls_per_axis[0];
        double min_face = h[0];
        for (int k = 0; k < D; ++k) {
            sub = std::min(sub, h[k] / balls_per_axis[k]);
            min_face = std::min(min_face, h[k]);
        }
        radius_ = alpha * sub / 2.0;
        // Radius bound of the method: at most one fourth of the diameter of
        // the smallest face of the cell.
        if (radius_ > min_face / 4.0 + 1e-15 * min_face)
            throw Error("ball packing: radius " + std::to_string(radius_) +
                        " exceeds one fourth of the smallest face diameter " +
                        std::to_string(min_face));

        const int nc = mesh.cell_count();
        centers_.resize((size_t)nc * per_cell_);
        rho_.resize(nc);
        const double bv = ball_volume<D>(radius_);
        for (int c = 0; c < nc; ++c) {
            const Vec<D> lo = mesh.cell_lo(c);
            std::array<int, D> s{};
            for (int b = 0; b < per_cell_; ++b) {
                Vec<D>& x = centers_[(size_t)c * per_cell_ + b];
                for (int k = 0; k < D; ++k)
                    x[k] = lo[k] + (s[k] + 0.5) * h[k] / balls_per_axis[k];
                for (int k = 0; k < D; ++k) {
                    if (++s[k] < balls_per_axis[k]) break;
                    s[k] = 0;
                }
            }
            // |K|_phi = rho_K * n_K * phi_K * |B|
            rho_[c] = mesh.porous_volume(c) /
                      (per_cell_ * mesh.porosity(c) * bv);
        }
    }

    const Mesh<D>& mesh() const { return *mesh_; }
    int balls_per_cell() const { return per_cell_; }
    int ball_count() const { return (int)centers_.size(); }
    double radius() const { return radius_; }
    double rho(int cell) const { return rho_[(size_t)cell]; }

    int cell_of(int flat) const { return flat / per_cell_; }
    int slot_of(int flat) const { return flat % per_cell_; }
    int flat_of(int cell, int slot) const { return cell * per_cell_ + slot; }

    Ball<D> ball(int flat) const {
        return {centers_[(size_t)flat], radius_};
    }

    /// All resident balls whose cell box intersects the query ball's
    /// bounding box: a superset of the balls intersecting the query,
    /// with no false negatives. Returned in ascending flat-index order.
    std::vector<int> neighbor_candidates(const Ball<D>& query) const {
        const Domain<D>& dom = mesh_->domain();
        const Vec<D>& h = mesh_->cell_size();
        std::array<int, D> lo, hi;
        for (int k = 0; k < D; ++k) {
            double a = query.center[k] - query.radius;
            double b = query.center[k] + query.radius;
            lo[k] = std::clamp((int)std::floor((a - dom.lo[k]) / h[k]), 0,
                               dom.dims[k] - 1);
            hi[k] = std::clamp((int)std::floor((b - dom.lo[k]) / h[k]), 0,
                               dom.dims[k] - 1);
        }
        std::vector<int> out;
        std::array<int, D> m = lo;
        while (true) {
            const int cell = mesh_->flat_index(m);
            for (int s = 0; s < per_cell_; ++s)
                out.push_back(flat_of(cell, s));
            int k = 0;
            for (; k < D; ++k) {
                if (++m[k] <= hi[k]) break;
                m[k] = lo[k];
            }
            if (k == D) break;
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    const Mesh<D>* mesh_;
    std::array<int, D> balls_per_axis_;
    int per_cell_;
    double radius_;
    std::vector<Vec<D>> centers_;
    std::vector<double> rho_;
};

} // namespace bchar

#endif
