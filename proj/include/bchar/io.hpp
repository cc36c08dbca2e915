#ifndef BCHAR_IO_HPP
#define BCHAR_IO_HPP

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "mesh.hpp"
#include "scheme.hpp"
#include "volume_matrix.hpp"

namespace bchar {

inline std::string format_sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9e", v);
    return buf;
}

/// Final-field CSV: one row per cell, `i,j[,k],x,y[,z],c`.
template <int D>
void write_field_csv(std::ostream& os, const Mesh<D>& mesh,
                     const ConcentrationField& c) {
    os << (D == 2 ? "i,j,x,y,c\n" : "i,j,k,x,y,z,c\n");
    for (int idx = 0; idx < mesh.cell_count(); ++idx) {
        const auto m = mesh.multi_index(idx);
        const Vec<D> x = mesh.cell_center(idx);
        for (int k = 0; k < D; ++k) os << m[k] << ",";
        for (int k = 0; k < D; ++k) os << format_sci(x[k]) << ",";
        os << format_sci(c.values[(size_t)idx]) << "\n";
    }
}

inline void write_diagnostics_csv(std::ostream& os,
                                  const std::vector<StepDiagnostics>& steps) {
    os << "step,t,mass,mass_drift,outflow,inflow,rebalance_error,"
          "opt_residual,max_scale,wall_time\n";
    for (const auto& s : steps) {
        os << s.step << "," << format_sci(s.t) << "," << format_sci(s.mass)
           << "," << format_sci(s.mass_drift) << ","
           << format_sci(s.outflow) << "," << format_sci(s.inflow) << ","
           << format_sci(s.rebalance_error) << "," << format_sci(s.opt_residual)
           << "," << format_sci(s.max_scale) << "," << format_sci(s.wall_time)
           << "\n";
    }
}

/// Legacy-ASCII VTK structured-points snapshot with one CELL_DATA scalar.
template <int D>
void write_vtk(std::ostream& os, const Mesh<D>& mesh,
               const ConcentrationField& c, const std::string& field_name) {
    const auto& dom = mesh.domain();
    const Vec<D>& h = mesh.cell_size();
    os << "# vtk DataFile Version 3.0\n";
    os << "bchar snapshot t=" << format_sci(c.time) << "\n";
    os << "ASCII\n";
    os << "DATASET STRUCTURED_POINTS\n";
    os << "DIMENSIONS " << dom.dims[0] + 1 << " " << dom.dims[1] + 1 << " "
       << (D == 3 ? dom.dims[2] + 1 : 1) << "\n";
    os << "ORIGIN " << format_sci(dom.lo[0]) << " " << format_sci(dom.lo[1])
       << " " << (D == 3 ? format_sci(dom.lo[2]) : format_sci(0.0)) << "\n";
    os << "SPACING " << format_sci(h[0]) << " " << format_sci(h[1]) << " "
       << (D == 3 ? format_sci(h[2]) : format_sci(1.0)) << "\n";
    os << "CELL_DATA " << mesh.cell_count() << "\n";
    os << "SCALARS " << field_name << " double 1\n";
    os << "LOOKUP_TABLE default\n";
    for (int i = 0; i < mesh.cell_count(); ++i)
        os << format_sci(c.values[(size_t)i]) << "\n";
}

/// Coordinate-triplet debug dump of the volume matrix: `row col value`.
inline void write_matrix_triplets(std::ostream& os, const VolumeMatrix& m) {
    for (int k = 0; k < m.nnz(); ++k)
        os << m.row[k] << " " << m.col[k] << " " << format_sci(m.val[k])
           << "\n";
}

/// Flat key=value config file; '#' starts a comment, blank lines ignored.
inline std::map<std::string, std::string> parse_config(std::istream& is) {
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const char* ws = " \t\r";
        const auto b = s.find_first_not_of(ws);
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(ws);
        return s.substr(b, e - b + 1);
    };
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error("config line " + std::to_string(lineno) +
                        ": expected key=value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

inline std::map<std::string, std::string> parse_config_file(
    const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open config file: " + path);
    return parse_config(f);
}

} // namespace bchar

#endif
