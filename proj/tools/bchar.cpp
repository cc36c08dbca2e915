// Command-line driver: run simulations, emit snapshots, error tables and
// per-step diagnostics.
#include <CLI11.hpp>

#include <bchar/bchar.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace bchar;

struct Options {
    std::string case_name;
    std::vector<int> mesh_dims;      // empty = case default
    double dt = 0;                   // required for run/convergence
    std::vector<int> balls;          // empty = config default
    SchemeConfig scheme;
    double velocity_scale = 1.0;
    std::string output_dir = ".";
    std::vector<double> snapshot_times;
    bool write_vtk_files = false;
    int refine_levels = 2;
    double euler_dt = 0.001;
    int threads = 0; // 0 = machine default
    // convergence verb
    std::vector<std::string> mesh_list;
    std::vector<double> dt_list;
};

std::vector<int> parse_dims(const std::string& s) {
    std::vector<int> dims;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, 'x')) dims.push_back(std::stoi(part));
    if (dims.size() != 2 && dims.size() != 3)
        throw Error("mesh/balls spec '" + s + "' must be NxM or NxMxK");
    return dims;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(std::stod(part));
    return out;
}

std::vector<std::string> parse_string_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(part);
    return out;
}

int case_dimension(const std::string& name) {
    for (const auto& n : builtin_case_names(2))
        if (n == name) return 2;
    for (const auto& n : builtin_case_names(3))
        if (n == name) return 3;
    throw Error("unknown case '" + name + "'");
}

/// Applies config-file values as defaults before flag parsing, so flags
/// win over file values.
void apply_config_file(const std::string& path, Options& o,
                       std::string& mesh_spec, std::string& balls_spec,
                       std::string& snapshots_spec, std::string& meshes_spec,
                       std::string& dts_spec) {
    for (const auto& [k, v] : parse_config_file(path)) {
        if (k == "case") o.case_name = v;
        else if (k == "mesh") mesh_spec = v;
        else if (k == "dt") o.dt = std::stod(v);
        else if (k == "balls") balls_spec = v;
        else if (k == "rebalance_iters") o.scheme.rebalance_iters = std::stoi(v);
        else if (k == "rebalance_tol") o.scheme.rebalance_tol = std::stod(v);
        else if (k == "optimizer_tol") o.scheme.optimizer_tol = std::stod(v);
        else if (k == "optimizer_max_iters")
            o.scheme.optimizer_max_iters = std::stoi(v);
        else if (k == "rk_substeps") o.scheme.rk_substeps = std::stoi(v);
        else if (k == "cardinal_points")
            o.scheme.cardinal_points = std::stoi(v);
        else if (k == "projection_samples")
            o.scheme.projection_samples = std::stoi(v);
        else if (k == "velocity_scale") o.velocity_scale = std::stod(v);
        else if (k == "threads") o.threads = std::stoi(v);
        else if (k == "output_dir") o.output_dir = v;
        else if (k == "refine_levels") o.refine_levels = std::stoi(v);
        else if (k == "euler_dt") o.euler_dt = std::stod(v);
        else if (k == "snapshots") snapshots_spec = v;
        else if (k == "vtk") o.write_vtk_files = (v == "1" || v == "true");
        else if (k == "meshes") meshes_spec = v;
        else if (k == "dts") dts_spec = v;
        else throw Error("unknown config key '" + k + "'");
    }
}

struct CaseRun {
    double e1 = std::nan("");
    double e2 = std::nan("");
    double wall_per_step = 0;
    int steps = 0;
};

template <int D>
CaseRun execute_case(const Options& o, const std::string& mesh_spec,
                     double dt, bool write_outputs) {
    CaseSpec<D> spec = builtin_case<D>(o.case_name);
    std::vector<int> dims =
        mesh_spec.empty() ? o.mesh_dims : parse_dims(mesh_spec);
    if (!dims.empty()) {
        if ((int)dims.size() != D)
            throw Error("mesh spec has wrong dimension for case " +
                        o.case_name);
        for (int k = 0; k < D; ++k) spec.domain.dims[k] = dims[(size_t)k];
    }
    if (o.velocity_scale != 1.0) {
        const double s = o.velocity_scale;
        const auto base = spec.field.eval;
        spec.field.eval = [base, s](const Vec<D>& x, double t) {
            return s * base(x, t);
        };
        if (s == 0.0) {
            // A frozen flow returns the initial data at T.
            spec.reference = ReferenceKind::Initial;
        }
    }
    SchemeConfig cfg = o.scheme;
    if (!o.balls.empty()) {
        if ((int)o.balls.size() != D)
            throw Error("balls spec has wrong dimension for case " +
                        o.case_name);
        // The library packs the same count per axis.
        for (int k = 1; k < D; ++k)
            if (o.balls[(size_t)k] != o.balls[0])
                throw Error("balls per axis must be equal, e.g. 2x2");
        cfg.balls_per_axis = o.balls[0];
        spec.balls_per_axis = 0; // explicit flag beats the case default
    }
    const Mesh<D> mesh(spec.domain, spec.porosity);
    if (!(dt > 0)) throw Error("a positive --dt is required");
    const auto levels = uniform_time_levels(spec.final_time, dt);

    namespace fs = std::filesystem;
    if (write_outputs) fs::create_directories(o.output_dir);
    const std::string stem =
        (fs::path(o.output_dir) / spec.name).string();

    std::vector<double> pending = o.snapshot_times;
    std::sort(pending.begin(), pending.end());
    int snap_id = 0;
    std::function<void(const ConcentrationField&)> on_step;
    if (write_outputs && o.write_vtk_files) {
        on_step = [&](const ConcentrationField& c) {
            const double eps = 0.5 * dt;
            while (!pending.empty() && pending.front() <= c.time + eps) {
                pending.erase(pending.begin());
                char suffix[32];
                std::snprintf(suffix, sizeof(suffix), "_%04d.vtk", snap_id++);
                std::ofstream f(stem + suffix, std::ios::binary);
                write_vtk(f, mesh, c, "concentration");
            }
        };
    }

    RunDiagnostics diag;
    const auto t0 = std::chrono::steady_clock::now();
    const ConcentrationField final_field =
        run_case(spec, mesh, cfg, levels, &diag, on_step);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();

    if (write_outputs) {
        std::ofstream fc(stem + "_field.csv", std::ios::binary);
        write_field_csv(fc, mesh, final_field);
        std::ofstream fd(stem + "_diagnostics.csv", std::ios::binary);
        write_diagnostics_csv(fd, diag.steps);
    }

    CaseRun r;
    r.steps = (int)diag.steps.size();
    r.wall_per_step = r.steps > 0 ? wall / r.steps : wall;
    const ConcentrationField ref =
        reference_field(spec, mesh, cfg, o.refine_levels, o.euler_dt);
    const auto [e1, e2] = error_norms(final_field, ref, mesh);
    r.e1 = e1;
    r.e2 = e2;
    return r;
}

CaseRun execute_case_any(const Options& o, const std::string& mesh_spec,
                         double dt, bool write_outputs) {
    return case_dimension(o.case_name) == 2
               ? execute_case<2>(o, mesh_spec, dt, write_outputs)
               : execute_case<3>(o, mesh_spec, dt, write_outputs);
}

int cmd_run(const Options& o) {
    const CaseRun r = execute_case_any(o, "", o.dt, true);
    std::printf("E1=%.9e E2=%.9e\n", r.e1, r.e2);
    return 0;
}

int cmd_convergence(const Options& o) {
    if (o.mesh_list.empty() || o.mesh_list.size() != o.dt_list.size())
        throw Error("convergence requires equal-length --meshes and --dts");
    namespace fs = std::filesystem;
    fs::create_directories(o.output_dir);
    std::ofstream csv(
        (fs::path(o.output_dir) / (o.case_name + "_convergence.csv")).string(),
        std::ios::binary);
    csv << "mesh,dt,E1,E2,wall_per_step\n";
    std::printf("%-12s %-10s %-15s %-15s %-15s\n", "mesh", "dt", "E1", "E2",
                "wall/step[s]");
    for (size_t i = 0; i < o.mesh_list.size(); ++i) {
        const CaseRun r =
            execute_case_any(o, o.mesh_list[i], o.dt_list[i], false);
        std::printf("%-12s %-10g %-15.9e %-15.9e %-15.3e\n",
                    o.mesh_list[i].c_str(), o.dt_list[i], r.e1, r.e2,
                    r.wall_per_step);
        csv << o.mesh_list[i] << "," << format_sci(o.dt_list[i]) << ","
            << format_sci(r.e1) << "," << format_sci(r.e2) << ","
            << format_sci(r.wall_per_step) << "\n";
    }
    return 0;
}

int cmd_cases() {
    for (const auto& n : builtin_case_names(2)) std::printf("%s\n", n.c_str());
    for (const auto& n : builtin_case_names(3)) std::printf("%s\n", n.c_str());
    return 0;
}

bool report(const char* name, bool ok) {
    std::printf("%-55s %s\n", name, ok ? "PASS" : "FAIL");
    return ok;
}

/// Fast subset of the property suite.
int cmd_selftest() {
    bool all = true;

    {
        // Lens volume vs Monte-Carlo, one 2D and one 3D pair.
        std::mt19937_64 rng(12345);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        bool ok = true;
        for (int rep = 0; rep < 4; ++rep) {
            const Vec<2> a{u(rng), u(rng)}, b{u(rng), u(rng)};
            const double ra = 0.5 + 0.5 * std::abs(u(rng));
            const double rb = 0.5 + 0.5 * std::abs(u(rng));
            const double v = ball_intersection_volume<2>(a, ra, b, rb);
            long hits = 0;
            const long n = 200000;
            for (long i = 0; i < n; ++i) {
                const Vec<2> p{a[0] + ra * u(rng), a[1] + ra * u(rng)};
                if (distance(p, a) <= ra && distance(p, b) <= rb) ++hits;
            }
            const double mc = 4.0 * ra * ra * (double)hits / (double)n;
            ok = ok && std::abs(v - mc) <=
                           5e-2 * ball_volume<2>(std::min(ra, rb)) + 1e-12;
        }
        all &= report("lens volume vs Monte-Carlo", ok);
    }

    {
        // Hand scaling example: [[2,0],[1,1]], all row and column targets
        // 2; one column-then-row pass gives [[2,0],[0.5,1.5]].
        VolumeMatrix m;
        m.n_c = 2;
        m.n_rows = 2;
        m.row = {0, 1, 1};
        m.col = {0, 0, 1};
        m.val = {2.0, 1.0, 1.0};
        m.b_loc = {2.0, 2.0};
        m.b_glob = {2.0, 2.0};
        m.build_adjacency();
        scaling_iteration(m);
        const bool ok = std::abs(m.val[0] - 2.0) < 1e-12 &&
                        std::abs(m.val[1] - 0.5) < 1e-12 &&
                        std::abs(m.val[2] - 1.5) < 1e-12;
        all &= report("scaling iteration hand example", ok);
    }

    {
        // Min-norm adjustment restores exact sums on a small system.
        VolumeMatrix m;
        m.n_c = 2;
        m.n_rows = 2;
        m.row = {0, 0, 1, 1};
        m.col = {0, 1, 0, 1};
        m.val = {1.1, 0.4, 0.5, 0.9};
        m.b_loc = {1.5, 1.5};
        m.b_glob = {1.4, 1.6};
        m.build_adjacency();
        const ConstraintSystem sys = assemble_constraints(m);
        OptimizerDiagnostics diag;
        const auto x = solve_min_norm(sys, diag, 1e-12, 5000);
        apply_adjustment(m, x);
        all &= report("min-norm adjustment meets both sum targets",
                      m.balance_error() < 1e-9);
    }

    {
        // One coarse translation run: conservation plus table accuracy.
        Options o;
        o.case_name = "tc1_2d";
        o.dt = 0.8;
        const CaseRun r = execute_case<2>(o, "16x16", 0.8, false);
        all &= report("translation 16x16 matches published E1 within 10%",
                      std::abs(r.e1 - 4.7637e-01) <= 0.1 * 4.7637e-01);
    }

    return all ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    using namespace bchar;
    CLI::App app{"Ball-approximated characteristics advection solver"};
    app.require_subcommand(1);

    Options o;
    std::string config_path, mesh_spec, balls_spec, snapshots_spec;
    std::string meshes_spec, dts_spec;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path,
                        "key=value config file; flags win over file values");
        cmd->add_option("--case", o.case_name, "built-in case name");
        cmd->add_option("--mesh", mesh_spec, "mesh dims, e.g. 16x16");
        cmd->add_option("--dt", o.dt, "uniform time step");
        cmd->add_option("--balls", balls_spec, "balls per cell, e.g. 2x2");
        cmd->add_option("--rebalance-iters", o.scheme.rebalance_iters,
                        "scaling iterations before the optimizer");
        cmd->add_option("--rebalance-tol", o.scheme.rebalance_tol,
                        "early-stop tolerance for scaling iterations");
        cmd->add_option("--optimizer-tol", o.scheme.optimizer_tol,
                        "relative equality residual tolerance");
        cmd->add_option("--optimizer-max-iters", o.scheme.optimizer_max_iters,
                        "projection iteration cap");
        cmd->add_option("--rk-substeps", o.scheme.rk_substeps,
                        "RK4 sub-intervals per time step");
        cmd->add_option("--cardinal-points", o.scheme.cardinal_points,
                        "tracked points per ball surface (0 = automatic)");
        cmd->add_option("--projection-samples", o.scheme.projection_samples,
                        "per-axis midpoint samples for initial projection");
        cmd->add_option("--velocity-scale", o.velocity_scale,
                        "multiplies the case velocity field");
        cmd->add_option("--threads", o.threads,
                        "worker thread cap (0 = machine)");
        cmd->add_option("--output-dir", o.output_dir, "output directory");
        cmd->add_option("--refine-levels", o.refine_levels,
                        "benchmark reference refinement levels");
        cmd->add_option("--euler-dt", o.euler_dt,
                        "benchmark reference Euler step");
    };

    CLI::App* run = app.add_subcommand("run", "run one simulation");
    add_common(run);
    run->add_option("--snapshots", snapshots_spec,
                    "comma-separated snapshot times");
    run->add_flag("--vtk", o.write_vtk_files,
                  "write structured-grid snapshots at snapshot times");

    CLI::App* conv =
        app.add_subcommand("convergence", "error table over a mesh/dt ladder");
    add_common(conv);
    conv->add_option("--meshes", meshes_spec,
                     "comma-separated mesh list, e.g. 16x16,32x32");
    conv->add_option("--dts", dts_spec, "comma-separated dt list");

    CLI::App* cases = app.add_subcommand("cases", "list built-in cases");
    CLI::App* selftest =
        app.add_subcommand("selftest", "fast property-suite subset");

    // Apply the config file (if any) before flag parsing so flags win.
    try {
        for (int i = 1; i < argc; ++i) {
            const std::string arg = argv[i];
            if (arg == "--config" && i + 1 < argc)
                config_path = argv[i + 1];
            else if (arg.rfind("--config=", 0) == 0)
                config_path = arg.substr(9);
        }
        if (!config_path.empty())
            apply_config_file(config_path, o, mesh_spec, balls_spec,
                              snapshots_spec, meshes_spec, dts_spec);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* active = app.get_subcommands().front();
        if (!mesh_spec.empty()) o.mesh_dims = parse_dims(mesh_spec);
        if (!balls_spec.empty()) {
            const auto b = parse_dims(balls_spec);
            o.balls.assign(b.begin(), b.end());
        }
        if (!snapshots_spec.empty())
            o.snapshot_times = parse_double_list(snapshots_spec);
        if (!meshes_spec.empty()) o.mesh_list = parse_string_list(meshes_spec);
        if (!dts_spec.empty()) o.dt_list = parse_double_list(dts_spec);
        if (o.threads > 0) set_thread_count(o.threads);

        if (active == run) {
            if (o.case_name.empty()) throw Error("--case is required");
            return cmd_run(o);
        }
        if (active == conv) {
            if (o.case_name.empty()) throw Error("--case is required");
            return cmd_convergence(o);
        }
        if (active == cases) return cmd_cases();
        if (active == selftest) return cmd_selftest();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
