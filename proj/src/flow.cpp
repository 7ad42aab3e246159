#include "anvil/flow.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace anvil {

TurbulenceIc compute_turbulence_ic(const FlowConditions& cond, double length_scale_m,
                                   double c_mu) {
    if (!(length_scale_m > 0.0)) {
        throw Error(Err::RangeViolation, "turbulence length scale must be > 0");
    }
    TurbulenceIc ic;
    ic.c_mu = c_mu;
    ic.length_scale_m = length_scale_m;
    double ui = cond.inlet_speed_m_s * cond.turbulence_intensity;
    ic.k_m2_s2 = 1.5 * ui * ui;
    ic.omega_1_s = std::sqrt(ic.k_m2_s2) / (std::pow(c_mu, 0.25) * length_scale_m);
    return ic;
}

VoxelDomain voxel_domain_from_hexmesh(const HexMesh& mesh) {
    VoxelDomain d;
    d.n = mesh.base;
    Vec3 cell = mesh.base_cell;
    double h = cell.x;
    if (std::abs(cell.y - h) > 1e-9 * h || std::abs(cell.z - h) > 1e-9 * h) {
        throw Error(Err::Unstable,
                    "internal solver needs cubic cells; build the domain with "
                    "cubic_base_counts");
    }
    d.dx_m = h / kMmPerM;
    d.origin_m = mesh.origin / kMmPerM;
    if (mesh.base_inside.size() != d.count()) {
        throw Error(Err::RangeViolation, "hex mesh lacks base-level occupancy data");
    }
    d.solid = mesh.base_inside;

    int min_ix = d.n.x, max_ix = -1;
    for (int z = 0; z < d.n.z; ++z)
        for (int y = 0; y < d.n.y; ++y)
            for (int x = 0; x < d.n.x; ++x)
                if (d.solid[d.idx(x, y, z)]) {
                    min_ix = std::min(min_ix, x);
                    max_ix = std::max(max_ix, x);
                }
    d.body_length_m = max_ix >= min_ix ? (max_ix - min_ix + 1) * d.dx_m : 0.0;
    return d;
}

double frontal_area_m2(const VoxelDomain& domain) {
    long columns = 0;
    for (int z = 0; z < domain.n.z; ++z) {
        for (int y = 0; y < domain.n.y; ++y) {
            for (int x = 0; x < domain.n.x; ++x) {
                if (domain.solid[domain.idx(x, y, z)]) {
                    ++columns;
                    break;
                }
            }
        }
    }
    return static_cast<double>(columns) * domain.dx_m * domain.dx_m;
}

void export_field(const FlowField& field, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(Err::IoFailure, "cannot open for writing: " + path);
    }
    const std::size_t n = field.velocity_m_s.size();
    out << "# vtk DataFile Version 3.0\n";
    out << "flow field: U (m/s), p (Pa gauge)\n";
    out << "ASCII\nDATASET STRUCTURED_POINTS\n";
    out << "DIMENSIONS " << field.n.x << " " << field.n.y << " " << field.n.z << "\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "ORIGIN %.9g %.9g %.9g\n", field.origin_m.x,
                  field.origin_m.y, field.origin_m.z);
    out << buf;
    std::snprintf(buf, sizeof(buf), "SPACING %.9g %.9g %.9g\n", field.dx_m, field.dx_m,
                  field.dx_m);
    out << buf;
    out << "POINT_DATA " << n << "\n";
    out << "VECTORS U double\n";
    for (const Vec3& u : field.velocity_m_s) {
        std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", u.x, u.y, u.z);
        out << buf;
    }
    out << "SCALARS p double 1\nLOOKUP_TABLE default\n";
    for (double p : field.pressure_pa) {
        std::snprintf(buf, sizeof(buf), "%.9g\n", p);
        out << buf;
    }
    if (!out) {
        throw Error(Err::IoFailure, "write failed: " + path);
    }
}

FlowField import_field(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(Err::IoFailure, "cannot open field file: " + path);
    }
    FlowField f;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "DIMENSIONS") {
            ls >> f.n.x >> f.n.y >> f.n.z;
        } else if (tok == "ORIGIN") {
            ls >> f.origin_m.x >> f.origin_m.y >> f.origin_m.z;
        } else if (tok == "SPACING") {
            ls >> f.dx_m;
        } else if (tok == "POINT_DATA") {
            ls >> n;
        } else if (tok == "VECTORS") {
            f.velocity_m_s.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                in >> f.velocity_m_s[i].x >> f.velocity_m_s[i].y >> f.velocity_m_s[i].z;
            }
        } else if (tok == "SCALARS") {
            std::getline(in, line); // LOOKUP_TABLE default
            f.pressure_pa.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                in >> f.pressure_pa[i];
            }
        }
    }
    if (f.velocity_m_s.empty() || f.velocity_m_s.size() != f.pressure_pa.size()) {
        throw Error(Err::ParseError, "field file missing U/p point data: " + path);
    }
    return f;
}

} // namespace anvil
