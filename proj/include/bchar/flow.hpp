#ifndef BCHAR_FLOW_HPP
#define BCHAR_FLOW_HPP

#include <atomic>
#include <functional>
#include <string>
#include <vector>

#include "balls.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "mesh.hpp"
#include "parallel.hpp"

namespace bchar {

template <int D>
struct VelocityField {
    std::function<Vec<D>(const Vec<D>&, double)> eval;
    bool divergence_free = false;
    bool time_dependent = false;

    Vec<D> operator()(const Vec<D>& x, double t) const { return eval(x, t); }
};

/// Image of a resident ball under backward characteristic tracking:
/// tracked center, estimated radius and equivalent porosity phi_hat with
/// rho_K * phi_hat * |B_hat| = rho_K * phi_K * |B| for solenoidal fields.
template <int D>
struct TrackedBall {
    Vec<D> center;
    double radius;
    double equiv_porosity;
    int cell; // source cell K
    int slot; // source slot s
};

/// Integrates dX/dt = u(X,t)/phi(X) from t_end to t_start with classical
/// RK4 in `substeps` equal sub-intervals (t_start < t_end back-tracks).
/// With `clamp_path` (the default) points leaving the closed domain are
/// clamped to the boundary and the velocity is evaluated at the clamped
/// position; the number of clamped sub-steps is accumulated in
/// `clamp_count` if given. Without it the trajectory runs free (the
/// velocity formula is evaluated outside the domain, porosity is extended
/// by nearest cell) and `exit_depth`, if given, records the deepest
/// outward excursion of the path from the mesh domain.
template <int D>
Vec<D> track_point(const VelocityField<D>& field, const Mesh<D>& mesh,
                   Vec<D> start, double t_end, double t_start, int substeps,
                   std::atomic<long>* clamp_count = nullptr,
                   bool clamp_path = true, double* exit_depth = nullptr) {
    const double h = (t_start - t_end) / substeps;
    Vec<D> x = start;
    auto rhs = [&](const Vec<D>& p, double t) {
        const Vec<D> q = clamp_path ? mesh.clamp_to_domain(p) : p;
        return (1.0 / mesh.porosity_at(q)) * field(q, t);
    };
    auto record_depth = [&](const Vec<D>& p) {
        if (!exit_depth) return;
        const Domain<D>& dom = mesh.domain();
        for (int k = 0; k < D; ++k) {
            *exit_depth = std::max(*exit_depth, dom.lo[k] - p[k]);
            *exit_depth = std::max(*exit_depth, p[k] - dom.hi[k]);
        }
    };
    for (int s = 0; s < substeps; ++s) {
        const double t = t_end + s * h;
        const Vec<D> k1 = rhs(x, t);
        const Vec<D> k2 = rhs(x + (h / 2) * k1, t + h / 2);
        const Vec<D> k3 = rhs(x + (h / 2) * k2, t + h / 2);
        const Vec<D> k4 = rhs(x + h * k3, t + h);
        x = x + (h / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (clamp_path) {
            bool clamped = false;
            x = mesh.clamp_to_domain(x, &clamped);
            if (clamped && clamp_count) clamp_count->fetch_add(1);
        } else {
            record_depth(x);
        }
    }
    return x;
}

/// Deepest outward excursion (over all resident ball centers, over the
/// whole back-tracked path) from the mesh domain during one time step.
/// Zero means every characteristic stays inside, i.e. the no-flow
/// assumption holds for this step.
template <int D>
double probe_exit_depth(const VelocityField<D>& field, const Mesh<D>& mesh,
                        const BallCloud<D>& cloud, double t_next, double dt,
                        int substeps) {
    const int nb = cloud.ball_count();
    std::vector<double> depth((size_t)nb, 0.0);
    parallel_for(nb, [&](long i) {
        track_point(field, mesh, cloud.ball((int)i).center, t_next,
                    t_next - dt, substeps, nullptr, false, &depth[(size_t)i]);
    });
    double d = 0;
    for (double v : depth) d = std::max(d, v);
    return d;
}

/// Back-tracks one resident ball. With globally constant porosity the
/// radius is unchanged; otherwise `cardinal_points` points on the sphere
/// (the 2D/3D axis-aligned points) are tracked and the radius estimated
/// as the mean distance from the tracked center.
template <int D>
TrackedBall<D> track_ball(const VelocityField<D>& field, const Mesh<D>& mesh,
                          const Ball<D>& ball, int cell, int slot,
                          double t_end, double t_start, int substeps,
                          int cardinal_points,
                          std::atomic<long>* clamp_count = nullptr) {
    TrackedBall<D> out;
    out.cell = cell;
    out.slot = slot;
    out.center = track_point(field, mesh, ball.center, t_end, t_start,
                             substeps, clamp_count);
    const double phi_K = mesh.porosity(cell);
    if (mesh.uniform_porosity() || cardinal_points == 0) {
        out.radius = ball.radius;
        out.equiv_porosity = phi_K;
        return out;
    }
    // Track 2*D axis-aligned cardinal points; additional requested points
    // are spread over the axes again (same directions, harmless).
    const int np = cardinal_points;
    double sum = 0;
    for (int j = 0; j < np; ++j) {
        Vec<D> p = ball.center;
        const int axis = (j / 2) % D;
        p[axis] += (j % 2 == 0 ? ball.radius : -ball.radius);
        const Vec<D> q =
            track_point(field, mesh, p, t_end, t_start, substeps, clamp_count);
        sum += distance<D>(q, out.center);
    }
    out.radius = sum / np;
    if (out.radius <= 1e-14)
        throw Error("track_ball: degenerate collapse of ball (cell " +
                    std::to_string(cell) + ", slot " + std::to_string(slot) +
                    "), all cardinal points mapped onto the center");
    out.equiv_porosity =
        phi_K * ball_volume<D>(ball.radius) / ball_volume<D>(out.radius);
    return out;
}

/// All tracked balls of one time step plus the porous volume of each
/// tracked cell |F_{-dt}(K)|_phi. For solenoidal fields the latter is the
/// exact value |K|_phi.
template <int D>
struct TrackedCloud {
    std::vector<TrackedBall<D>> balls; // aligned with BallCloud flat indices
    std::vector<double> cell_volume;   // |F_{-dt}(K)|_phi per cell
    long clamped_points = 0;
};

template <int D>
TrackedCloud<D> track_cloud(const VelocityField<D>& field, const Mesh<D>& mesh,
                            const BallCloud<D>& cloud, double t_next,
                            double dt, int substeps, int cardinal_points) {
    if (!(dt > 0)) throw Error("track_cloud: dt must be positive");
    TrackedCloud<D> out;
    const int nb = cloud.ball_count();
    out.balls.resize(nb);
    std::atomic<long> clamps{0};
    parallel_for(nb, [&](long i) {
        out.balls[i] = track_ball(field, mesh, cloud.ball((int)i),
                                  cloud.cell_of((int)i), cloud.slot_of((int)i),
                                  t_next, t_next - dt, substeps,
                                  cardinal_points, &clamps);
    });
    out.clamped_points = clamps.load();
    const int nc = mesh.cell_count();
    out.cell_volume.assign(nc, 0.0);
    if (field.divergence_free) {
        for (int c = 0; c < nc; ++c) out.cell_volume[c] = mesh.porous_volume(c);
    } else {
        for (int i = 0; i < nb; ++i) {
            const TrackedBall<D>& tb = out.balls[(size_t)i];
            out.cell_volume[(size_t)tb.cell] +=
                cloud.rho(tb.cell) * tb.equiv_porosity *
                ball_volume<D>(tb.radius);
        }
    }
    return out;
}

} // namespace bchar

#endif
