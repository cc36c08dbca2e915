// Acceptance suite: one pass/fail line per criterion. Usage:
//   bchar_acceptance [criterion ...]
// with no arguments every criterion runs. Exits nonzero if any ran
// criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <bchar/bchar.hpp>

using namespace bchar;

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 =
        std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(
                   std::chrono::steady_clock::now() - t0)
            .count();
    }
};

bool within(double got, double expected, double rel) {
    return std::abs(got - expected) <= rel * std::abs(expected);
}

template <int D>
std::pair<double, double> run_errors(const std::string& name, int n,
                                     double dt,
                                     RunDiagnostics* diag = nullptr) {
    auto spec = builtin_case<D>(name);
    Domain<D> dom = spec.domain;
    for (int k = 0; k < D; ++k) dom.dims[k] = n;
    const Mesh<D> mesh(dom, spec.porosity);
    SchemeConfig cfg;
    const auto c = run_case(spec, mesh, cfg,
                            uniform_time_levels(spec.final_time, dt), diag);
    const auto ref = reference_field(spec, mesh, cfg);
    return error_norms(c, ref, mesh);
}

bool table_criterion(int crit, const std::string& name,
                     const std::vector<double>& e1_expected,
                     const std::vector<double>& e2_expected, double rel,
                     double budget_seconds) {
    const std::vector<std::pair<int, double>> runs = {
        {16, 0.8}, {32, 0.4}, {64, 0.2}};
    Timer timer;
    bool ok = true;
    std::string detail;
    for (size_t r = 0; r < runs.size(); ++r) {
        const auto [e1, e2] =
            run_errors<2>(name, runs[r].first, runs[r].second);
        if (!within(e1, e1_expected[r], rel) ||
            !within(e2, e2_expected[r], rel))
            ok = false;
        char buf[128];
        std::snprintf(buf, sizeof buf, " [%d^2: E1=%.4e E2=%.4e]",
                      runs[r].first, e1, e2);
        detail += buf;
    }
    const double wall = timer.seconds();
    if (wall > budget_seconds) ok = false;
    std::printf("%s criterion %d: %s table within %.0f%%%s wall=%.0fs\n",
                ok ? "PASS" : "FAIL", crit, name.c_str(), 100 * rel,
                detail.c_str(), wall);
    return ok;
}

bool criterion1() {
    return table_criterion(1, "tc1_2d",
                           {4.7637e-01, 3.4889e-01, 2.5558e-01},
                           {3.8273e-01, 3.3183e-01, 2.9220e-01}, 0.10, 120);
}

bool criterion2() {
    return table_criterion(2, "tc2_2d",
                           {7.3138e-01, 6.1391e-01, 4.7916e-01},
                           {5.0673e-01, 4.1428e-01, 3.5931e-01}, 0.15, 600);
}

bool criterion3() {
    return table_criterion(3, "tc3_2d",
                           {1.4961e-01, 9.1979e-02, 5.6735e-02},
                           {1.5055e-01, 9.8428e-02, 6.7733e-02}, 0.15, 600);
}

bool criterion4() {
    auto spec = builtin_case<2>("solid_body_2d");
    Domain<2> dom = spec.domain;
    dom.dims = {128, 128};
    const Mesh<2> mesh(dom, spec.porosity);
    SchemeConfig cfg;
    const double dt = 2.0 * std::numbers::pi / 10.0;
    const auto c = run_case(spec, mesh, cfg,
                            uniform_time_levels(spec.final_time, dt));
    const auto ref = reference_field(spec, mesh, cfg);
    const auto [e1, e2] = error_norms(c, ref, mesh);
    bool ok = within(e1, 1.3630e-01, 0.15) && within(e2, 2.1178e-01, 0.15);

    // the slot must survive the revolution: low values inside the slot,
    // high values in the cylinder body
    double slot_min = 1e300, body_min = 1e300;
    for (int i = 0; i < mesh.cell_count(); ++i) {
        const auto p = mesh.cell_center(i);
        const double rs = std::hypot(p[0] - 0.5, p[1] - 0.75);
        const bool in_slot = p[0] >= 0.485 && p[0] <= 0.515 &&
                             p[1] >= 0.62 && p[1] <= 0.80;
        const bool in_body = rs <= 0.10 && !(p[0] >= 0.455 && p[0] <= 0.545 &&
                                             p[1] >= 0.58);
        if (in_slot) slot_min = std::min(slot_min, c.values[(size_t)i]);
        if (in_body) body_min = std::min(body_min, c.values[(size_t)i]);
    }
    const bool slot_ok = slot_min < 0.5 && body_min > 0.5;
    ok = ok && slot_ok;
    std::printf("%s criterion 4: solid body E1=%.4e E2=%.4e slot_min=%.2f "
                "body_min=%.2f\n",
                ok ? "PASS" : "FAIL", e1, e2, slot_min, body_min);
    return ok;
}

bool criterion5() {
    bool ok = true;
    std::string detail;
    const std::vector<std::tuple<int, double, double>> runs = {
        {64, 0.5, 27.0}, {128, 0.25, 18.0}};
    for (const auto& [n, dt, expected] : runs) {
        auto spec = builtin_case<2>("deform_2d");
        Domain<2> dom = spec.domain;
        dom.dims = {n, n};
        const Mesh<2> mesh(dom, spec.porosity);
        SchemeConfig cfg;
        const auto c = run_case(spec, mesh, cfg,
                                uniform_time_levels(spec.final_time, dt));
        double mx = 0;
        for (double v : c.values) mx = std::max(mx, v);
        const double decrease = 100.0 * (1.0 - mx);
        if (std::abs(decrease - expected) > 7.0) ok = false;
        char buf[96];
        std::snprintf(buf, sizeof buf, " [%d^2: amplitude decrease %.1f%%]",
                      n, decrease);
        detail += buf;
    }
    std::printf("%s criterion 5: deformational flow%s\n", ok ? "PASS" : "FAIL",
                detail.c_str());
    return ok;
}

bool criterion6() {
    const std::vector<std::string> names = {"tc1_3d", "tc2_3d", "tc3_3d"};
    const std::vector<double> e1_expected = {4.8130e-01, 9.6106e-01,
                                             2.3673e-01};
    const std::vector<double> e2_expected = {4.0692e-01, 6.2141e-01,
                                             2.4150e-01};
    Timer timer;
    bool ok = true;
    std::string detail;
    for (size_t r = 0; r < names.size(); ++r) {
        const auto [e1, e2] = run_errors<3>(names[r], 16, 0.8);
        if (!within(e1, e1_expected[r], 0.15) ||
            !within(e2, e2_expected[r], 0.15))
            ok = false;
        char buf[128];
        std::snprintf(buf, sizeof buf, " [%s: E1=%.4e E2=%.4e]",
                      names[r].c_str(), e1, e2);
        detail += buf;
    }
    const double wall = timer.seconds();
    if (wall > 900.0) ok = false;
    std::printf("%s criterion 6: 3D tables%s wall=%.0fs\n",
                ok ? "PASS" : "FAIL", detail.c_str(), wall);
    return ok;
}

template <int D>
bool conservation_of(const std::string& name, int n, double dt,
                     std::string& detail) {
    auto spec = builtin_case<D>(name);
    Domain<D> dom = spec.domain;
    for (int k = 0; k < D; ++k) dom.dims[k] = n;
    const Mesh<D> mesh(dom, spec.porosity);
    SchemeConfig cfg;
    RunDiagnostics diag;
    run_case(spec, mesh, cfg, uniform_time_levels(spec.final_time, dt),
             &diag);
    double max_drift = 0, max_res = 0;
    for (const auto& sd : diag.steps) {
        max_drift = std::max(max_drift, std::abs(sd.mass_drift));
        max_res = std::max(max_res, sd.opt_residual);
    }
    const bool ok = max_drift <= 1e-8 && max_res <= 1e-9;
    char buf[128];
    std::snprintf(buf, sizeof buf, " [%s: drift=%.1e residual=%.1e]",
                  name.c_str(), max_drift, max_res);
    detail += buf;
    return ok;
}

// Constant preservation is checked on the no-flow cases (u.n = 0 on the
// boundary). Cases with genuine flow through the boundary dilute any
// constant with the zero-concentration inflow, which is the physically
// correct behaviour, so they are excluded here.
template <int D>
bool constant_preserved(const std::string& name, int n, double dt, int steps,
                        std::string& detail) {
    auto spec = builtin_case<D>(name);
    Domain<D> dom = spec.domain;
    for (int k = 0; k < D; ++k) dom.dims[k] = n;
    const Mesh<D> mesh(dom, spec.porosity);
    SchemeConfig cfg;
    std::array<int, D> bpa;
    bpa.fill(spec.balls_per_axis > 0 ? spec.balls_per_axis
                                     : cfg.balls_per_axis);
    const BallCloud<D> cloud(mesh, bpa, cfg.packing_alpha);
    ConcentrationField c;
    c.values.assign((size_t)mesh.cell_count(), 0.7);
    double worst = 0;
    for (int s = 0; s < steps; ++s) {
        StepDiagnostics sd;
        c = advance_step(c, mesh, cloud, spec.field, dt, cfg, sd);
        for (double v : c.values) worst = std::max(worst, std::abs(v - 0.7));
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, " [%s const dev=%.1e]", name.c_str(),
                  worst / 0.7);
    detail += buf;
    return worst / 0.7 <= 1e-9;
}

bool criterion7() {
    bool ok = true;
    std::string detail;
    ok &= conservation_of<2>("tc1_2d", 16, 0.8, detail);
    ok &= conservation_of<2>("tc2_2d", 16, 0.8, detail);
    ok &= conservation_of<2>("tc3_2d", 16, 0.8, detail);
    ok &= conservation_of<2>("solid_body_2d", 128,
                             2.0 * std::numbers::pi / 10.0, detail);
    ok &= conservation_of<2>("deform_2d", 64, 0.5, detail);
    ok &= conservation_of<3>("tc1_3d", 16, 0.8, detail);
    ok &= conservation_of<3>("tc2_3d", 16, 0.8, detail);
    ok &= conservation_of<3>("tc3_3d", 16, 0.8, detail);
    ok &= constant_preserved<2>("tc2_2d", 16, 0.8, 3, detail);
    ok &= constant_preserved<2>("deform_2d", 64, 0.5, 2, detail);
    std::printf("%s criterion 7: conservation invariants%s\n",
                ok ? "PASS" : "FAIL", detail.c_str());
    return ok;
}

bool criterion8() {
    auto spec = builtin_case<2>("tc2_2d");
    Domain<2> dom = spec.domain;
    dom.dims = {16, 16};
    const Mesh<2> mesh(dom, spec.porosity);
    SchemeConfig cfg;
    const BallCloud<2> cloud(mesh, {2, 2}, cfg.packing_alpha);
    const auto tracked =
        track_cloud(spec.field, mesh, cloud, 0.8, 0.8, cfg.rk_substeps, 0);
    VolumeMatrix m = build_initial_matrix(cloud, tracked, mesh);
    rebalance(m, 10, 0.0);
    const double err = m.balance_error();
    const bool ok = err <= 0.05;
    std::printf("%s criterion 8: balance error after 10 scaling iterations "
                "= %.4f (<= 0.05)\n",
                ok ? "PASS" : "FAIL", err);
    return ok;
}

// Monte-Carlo estimate of the intersection volume by sampling the tight
// bounding box of the lens.
template <int D>
double mc_lens(const Vec<D>& ca, double ra, const Vec<D>& cb, double rb,
               long samples, std::mt19937_64& rng) {
    Vec<D> lo, hi;
    double box = 1.0;
    for (int k = 0; k < D; ++k) {
        lo[k] = std::max(ca[k] - ra, cb[k] - rb);
        hi[k] = std::min(ca[k] + ra, cb[k] + rb);
        if (hi[k] <= lo[k]) return 0.0;
        box *= hi[k] - lo[k];
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    long hits = 0;
    for (long s = 0; s < samples; ++s) {
        Vec<D> p;
        for (int k = 0; k < D; ++k) p[k] = lo[k] + (hi[k] - lo[k]) * u(rng);
        double d2a = 0, d2b = 0;
        for (int k = 0; k < D; ++k) {
            d2a += (p[k] - ca[k]) * (p[k] - ca[k]);
            d2b += (p[k] - cb[k]) * (p[k] - cb[k]);
        }
        if (d2a <= ra * ra && d2b <= rb * rb) ++hits;
    }
    return box * (double)hits / (double)samples;
}

template <int D>
bool mc_oracle(std::mt19937_64& rng, double& worst) {
    std::uniform_real_distribution<double> rad(0.5, 1.0);
    std::uniform_real_distribution<double> dir(-1.0, 1.0);
    std::uniform_real_distribution<double> sep(0.2, 0.8);
    const long samples = 10000000;
    bool ok = true;
    for (int pair = 0; pair < 100; ++pair) {
        const double ra = rad(rng), rb = rad(rng);
        Vec<D> ca{}, n{};
        double norm = 0;
        for (int k = 0; k < D; ++k) {
            n[k] = dir(rng);
            norm += n[k] * n[k];
        }
        norm = std::sqrt(norm);
        const double d = sep(rng) * (ra + rb);
        Vec<D> cb;
        for (int k = 0; k < D; ++k) cb[k] = ca[k] + d * n[k] / norm;
        const double exact = ball_intersection_volume<D>(ca, ra, cb, rb);
        const double mc = mc_lens<D>(ca, ra, cb, rb, samples, rng);
        const double rel = std::abs(mc - exact) / exact;
        worst = std::max(worst, rel);
        if (rel > 1e-3) ok = false;
    }
    return ok;
}

bool criterion9() {
    std::mt19937_64 rng(20260826);
    double worst2 = 0, worst3 = 0;
    const bool mc2 = mc_oracle<2>(rng, worst2);
    const bool mc3 = mc_oracle<3>(rng, worst3);

    // brute-force all-pairs matrix build on an 8x8 mesh
    Domain<2> dom{{0, 0}, {1, 1}, {8, 8}};
    const Mesh<2> mesh(dom, 1.0);
    const BallCloud<2> cloud(mesh, {2, 2}, 0.98);
    VelocityField<2> field;
    field.divergence_free = true;
    field.eval = [](const Vec<2>& p, double) {
        return Vec<2>{(1.0 - 2.0 * p[1]) * (p[0] - p[0] * p[0]),
                      -(1.0 - 2.0 * p[0]) * (p[1] - p[1] * p[1])};
    };
    const auto tracked = track_cloud(field, mesh, cloud, 0.8, 0.8, 16, 0);
    const VolumeMatrix fast = build_initial_matrix(cloud, tracked, mesh);
    const std::function<std::vector<int>(const Ball<2>&)> all_pairs =
        [&](const Ball<2>&) {
        std::vector<int> out((size_t)cloud.ball_count());
        for (int i = 0; i < cloud.ball_count(); ++i) out[(size_t)i] = i;
        return out;
    };
    const VolumeMatrix brute =
        build_initial_matrix(cloud, tracked, mesh, all_pairs);
    bool matrix_ok = fast.nnz() == brute.nnz();
    double worst_entry = 0;
    if (matrix_ok) {
        for (int k = 0; k < fast.nnz(); ++k) {
            if (fast.row[k] != brute.row[k] || fast.col[k] != brute.col[k])
                matrix_ok = false;
            worst_entry =
                std::max(worst_entry, std::abs(fast.val[k] - brute.val[k]));
        }
        if (worst_entry > 1e-12) matrix_ok = false;
    }

    const bool ok = mc2 && mc3 && matrix_ok;
    std::printf("%s criterion 9: oracles [MC rel err 2D=%.1e 3D=%.1e] "
                "[matrix vs brute force: pattern %s, max entry diff %.1e]\n",
                ok ? "PASS" : "FAIL", worst2, worst3,
                matrix_ok ? "equal" : "DIFFERS", worst_entry);
    return ok;
}

bool criterion10() {
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> val(0.2, 1.5);
    std::normal_distribution<double> noise(0.0, 0.1);
    bool ok = true;
    double worst_gap = 0;
    for (int inst = 0; inst < 20; ++inst) {
        // dense n x n systems with n_z = n^2 <= 12 unknowns
        const int n = 2 + inst % 2; // alternate 4 and 9 nonzeros
        VolumeMatrix m;
        m.n_c = n;
        m.n_rows = n;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                m.row.push_back(i);
                m.col.push_back(j);
                m.val.push_back(val(rng));
            }
        std::vector<double> rs(n, 0.0), cs(n, 0.0);
        for (size_t k = 0; k < m.val.size(); ++k) {
            rs[(size_t)m.row[k]] += m.val[k];
            cs[(size_t)m.col[k]] += m.val[k];
        }
        m.b_loc = rs;
        m.b_glob = cs;
        const double shift = 0.04 * rs[0];
        m.b_loc[0] += shift;
        m.b_loc[1] -= shift;
        m.b_glob[0] += shift;
        m.b_glob[1] -= shift;
        m.build_adjacency();

        const ConstraintSystem sys = assemble_constraints(m);
        OptimizerDiagnostics diag;
        std::vector<double> x;
        try {
            x = solve_min_norm(sys, diag, 1e-11, 20000);
        } catch (const Error& e) {
            std::printf("FAIL criterion 10: instance %d solve failed: %s\n",
                        inst, e.what());
            return false;
        }
        double nx = 0;
        for (double xk : x) nx += xk * xk;

        const detail::NormalEquations normal(sys);
        std::vector<double> b_defect = sys.b;
        {
            const auto a1 = sys.apply(std::vector<double>(x.size(), 1.0));
            for (size_t i = 0; i < b_defect.size(); ++i) b_defect[i] -= a1[i];
        }
        for (int trial = 0; trial < 1000; ++trial) {
            auto y = x;
            for (double& yk : y) yk += noise(rng);
            auto r = b_defect;
            const auto ay = sys.apply(y);
            for (size_t i = 0; i < r.size(); ++i) r[i] -= ay[i];
            const auto corr = sys.apply_transpose(normal.solve(r));
            bool in_box = true;
            for (size_t k = 0; k < y.size(); ++k) {
                y[k] += corr[k];
                if (1.0 + y[k] < 0.0 || 1.0 + y[k] > 2.0) in_box = false;
            }
            if (!in_box || sys.residual(y) > 1e-9) continue;
            double ny = 0;
            for (double yk : y) ny += yk * yk;
            worst_gap = std::max(worst_gap, nx - ny);
            if (ny < nx - 1e-9) ok = false;
        }
    }
    std::printf("%s criterion 10: optimizer optimality over random feasible "
                "perturbations (worst norm gap %.1e)\n",
                ok ? "PASS" : "FAIL", worst_gap);
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    bool (*criteria[])() = {criterion1, criterion2, criterion3, criterion4,
                            criterion5, criterion6, criterion7, criterion8,
                            criterion9, criterion10};
    bool all_ok = true;
    for (int c = 1; c <= 10; ++c) {
        if (!wanted.empty() && !wanted.count(c)) continue;
        try {
            if (!criteria[c - 1]()) all_ok = false;
        } catch (const std::exception& e) {
            std::printf("FAIL criterion %d: exception: %s\n", c, e.what());
            all_ok = false;
        }
        std::fflush(stdout);
    }
    return all_ok ? 0 : 1;
}
