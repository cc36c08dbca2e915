#ifndef BCHAR_MESH_HPP
#define BCHAR_MESH_HPP

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace bchar {

/// Axis-aligned box domain partitioned into dims[0] x ... x dims[D-1] cells.
template <int D>
struct Domain {
    Vec<D> lo;
    Vec<D> hi;
    std::array<int, D> dims;

    int cell_count() const {
        int n = 1;
        for (int k = 0; k < D; ++k) n *= dims[k];
        return n;
    }
};

/// Cartesian mesh with a piecewise-constant porosity field. Cells are
/// indexed lexicographically with the x index varying fastest:
///   index = i0 + dims[0]*(i1 + dims[1]*i2).
/// Immutable after construction.
template <int D>
class Mesh {
public:
    Mesh(const Domain<D>& domain, std::vector<double> porosity)
        : domain_(domain), porosity_(std::move(porosity)) {
        for (int k = 0; k < D; ++k) {
            if (domain_.dims[k] <= 0)
                throw Error("mesh: dims[" + std::to_string(k) + "] = " +
                            std::to_string(domain_.dims[k]) + " must be positive");
            if (!(domain_.lo[k] < domain_.hi[k]))
                throw Error("mesh: lo[" + std::to_string(k) + "] >= hi[" +
                            std::to_string(k) + "]");
            h_[k] = (domain_.hi[k] - domain_.lo[k]) / domain_.dims[k];
        }
        const int nc = domain_.cell_count();
        if ((int)porosity_.size() != nc)
            throw Error("mesh: porosity has " + std::to_string(porosity_.size()) +
                        " entries, expected " + std::to_string(nc));
        cell_volume_ = 1.0;
        for (int k = 0; k < D; ++k) cell_volume_ *= h_[k];
        porous_volume_.resize(nc);
        uniform_porosity_ = true;
        for (int i = 0; i < nc; ++i) {
            if (!(porosity_[i] > 0.0))
                throw Error("mesh: porosity of cell " + std::to_string(i) +
                            " is " + std::to_string(porosity_[i]) +
                            ", must be positive");
            porous_volume_[i] = porosity_[i] * cell_volume_;
            if (porosity_[i] != porosity_[0]) uniform_porosity_ = false;
        }
    }

    Mesh(const Domain<D>& domain, double porosity)
        : Mesh(domain, std::vector<double>((size_t)domain.cell_count(), porosity)) {}

    const Domain<D>& domain() const { return domain_; }
    const Vec<D>& cell_size() const { return h_; }
    int cell_count() const { return domain_.cell_count(); }
    double cell_volume() const { return cell_volume_; }
    double porosity(int cell) const { return porosity_[(size_t)cell]; }
    double porous_volume(int cell) const { return porous_volume_[(size_t)cell]; }
    bool uniform_porosity() const { return uniform_porosity_; }

    double total_porous_volume() const {
        double s = 0;
        for (double v : porous_volume_) s += v;
        return s;
    }

    std::array<int, D> multi_index(int cell) const {
        std::array<int, D> m;
        for (int k = 0; k < D; ++k) {
            m[k] = cell % domain_.dims[k];
            cell /= domain_.dims[k];
        }
        return m;
    }

    int flat_index(const std::array<int, D>& m) const {
        int idx = 0;
        for (int k = D - 1; k >= 0; --k) idx = idx * domain_.dims[k] + m[k];
        return idx;
    }

    Vec<D> cell_lo(int cell) const {
        const auto m = multi_index(cell);
        Vec<D> x;
        for (int k = 0; k < D; ++k) x[k] = domain_.lo[k] + m[k] * h_[k];
        return x;
    }

    Vec<D> cell_center(int cell) const {
        const auto m = multi_index(cell);
        Vec<D> x;
        for (int k = 0; k < D; ++k) x[k] = domain_.lo[k] + (m[k] + 0.5) * h_[k];
        return x;
    }

    /// Cell containing a point. Cells are half-open boxes [lo, hi); points on
    /// the domain's upper boundary map to the last cell of that axis. Points
    /// outside the closed domain yield nullopt.
    std::optional<int> locate(const Vec<D>& p) const {
        std::array<int, D> m;
        for (int k = 0; k < D; ++k) {
            if (p[k] < domain_.lo[k] || p[k] > domain_.hi[k]) return std::nullopt;
            int i = (int)std::floor((p[k] - domain_.lo[k]) / h_[k]);
            if (i >= domain_.dims[k]) i = domain_.dims[k] - 1;
            if (i < 0) i = 0;
            m[k] = i;
        }
        return flat_index(m);
    }

    /// Porosity at a point (for characteristic tracking); points outside the
    /// domain take the porosity of the nearest cell via clamping.
    double porosity_at(const Vec<D>& p) const {
        Vec<D> q = p;
        for (int k = 0; k < D; ++k)
            q[k] = std::clamp(q[k], domain_.lo[k], domain_.hi[k]);
        return porosity_[(size_t)*locate(q)];
    }

    Vec<D> clamp_to_domain(const Vec<D>& p, bool* clamped = nullptr) const {
        Vec<D> q = p;
        for (int k = 0; k < D; ++k) {
            if (q[k] < domain_.lo[k]) {
                q[k] = domain_.lo[k];
                if (clamped) *clamped = true;
            } else if (q[k] > domain_.hi[k]) {
                q[k] = domain_.hi[k];
                if (clamped) *clamped = true;
            }
        }
        return q;
    }

private:
    Domain<D> domain_;
    std::vector<double> porosity_;
    std::vector<double> porous_volume_;
    Vec<D> h_;
    double cell_volume_;
    bool uniform_porosity_;
};

} // namespace bchar

#endif
