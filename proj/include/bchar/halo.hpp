#ifndef BCHAR_HALO_HPP
#define BCHAR_HALO_HPP

#include <array>
#include <string>
#include <vector>

#include "errors.hpp"
#include "mesh.hpp"

namespace bchar {

/// Enlarged mesh for time steps whose characteristics cross the domain
/// boundary: the cell lattice is continued outward by `rings` layers on
/// every side (porosity extended by nearest cell). Real cells keep their
/// positions and sizes; halo cells carry the inflow/outflow bookkeeping
/// so trace-back outside the domain lands on actual cells instead of
/// being clamped.
template <int D>
class HaloWorld {
public:
    HaloWorld(const Mesh<D>& real_mesh, int rings)
        : real_(&real_mesh), rings_(rings),
          mesh_(extended_domain(real_mesh, rings),
                extended_porosity(real_mesh, rings)) {
        if (rings < 1) throw Error("halo: rings must be >= 1");
        const int ne = mesh_.cell_count();
        ext_to_real_.resize((size_t)ne);
        for (int e = 0; e < ne; ++e) {
            const auto m = mesh_.multi_index(e);
            std::array<int, D> r;
            bool inside = true;
            for (int k = 0; k < D; ++k) {
                r[k] = m[k] - rings;
                if (r[k] < 0 || r[k] >= real_mesh.domain().dims[k])
                    inside = false;
            }
            ext_to_real_[(size_t)e] = inside ? real_mesh.flat_index(r) : -1;
        }
        real_to_ext_.resize((size_t)real_mesh.cell_count());
        for (int c = 0; c < real_mesh.cell_count(); ++c) {
            auto m = real_mesh.multi_index(c);
            for (int k = 0; k < D; ++k) m[k] += rings;
            real_to_ext_[(size_t)c] = mesh_.flat_index(m);
        }
    }

    const Mesh<D>& mesh() const { return mesh_; }
    const Mesh<D>& real_mesh() const { return *real_; }
    int rings() const { return rings_; }

    /// Real cell index of an extended cell, or -1 for halo cells.
    int ext_to_real(int ext) const { return ext_to_real_[(size_t)ext]; }
    int real_to_ext(int real) const { return real_to_ext_[(size_t)real]; }

private:
    static Domain<D> extended_domain(const Mesh<D>& real_mesh, int rings) {
        Domain<D> d = real_mesh.domain();
        const Vec<D>& h = real_mesh.cell_size();
        for (int k = 0; k < D; ++k) {
            d.lo[k] -= rings * h[k];
            d.hi[k] += rings * h[k];
            d.dims[k] += 2 * rings;
        }
        return d;
    }

    static std::vector<double> extended_porosity(const Mesh<D>& real_mesh,
                                                 int rings) {
        const Domain<D> d = extended_domain(real_mesh, rings);
        std::vector<double> phi((size_t)d.cell_count());
        // nearest real cell per axis
        std::array<int, D> m{};
        for (int e = 0; e < d.cell_count(); ++e) {
            std::array<int, D> r;
            for (int k = 0; k < D; ++k) {
                r[k] = m[k] - rings;
                if (r[k] < 0) r[k] = 0;
                const int n = real_mesh.domain().dims[k];
                if (r[k] >= n) r[k] = n - 1;
            }
            phi[(size_t)e] = real_mesh.porosity(real_mesh.flat_index(r));
            for (int k = 0; k < D; ++k) {
                if (++m[k] < d.dims[k]) break;
                m[k] = 0;
            }
        }
        return phi;
    }

    const Mesh<D>* real_;
    int rings_;
    Mesh<D> mesh_;
    std::vector<int> ext_to_real_;
    std::vector<int> real_to_ext_;
};

} // namespace bchar

#endif
