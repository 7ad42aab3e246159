#include "anvil/vtk.hpp"

#include <cstdio>
#include <fstream>
#include <unordered_map>

namespace anvil {

namespace {

// Shared-vertex emission for legacy VTK: quantize to picometers so identical
// corners across cells collapse to one point id.
class PointPool {
public:
    std::size_t id(const Vec3& p) {
        Key k{static_cast<long long>(std::llround(p.x * 1e6)),
              static_cast<long long>(std::llround(p.y * 1e6)),
              static_cast<long long>(std::llround(p.z * 1e6))};
        auto it = map_.find(k);
        if (it != map_.end()) return it->second;
        std::size_t idx = points_.size();
        points_.push_back(p);
        map_.emplace(k, idx);
        return idx;
    }

    const std::vector<Vec3>& points() const { return points_; }

private:
    struct Key {
        long long x, y, z;
        bool operator==(const Key& o) const { return x == o.x && y == o.y && z == o.z; }
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            std::uint64_t h = 1469598103934665603ULL;
            for (long long v : {k.x, k.y, k.z}) {
                h ^= static_cast<std::uint64_t>(v);
                h *= 1099511628211ULL;
            }
            return static_cast<std::size_t>(h);
        }
    };
    std::vector<Vec3> points_;
    std::unordered_map<Key, std::size_t, KeyHash> map_;
};

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(Err::IoFailure, "cannot open for writing: " + path);
    }
    return out;
}

void write_points(std::ofstream& out, const std::vector<Vec3>& pts) {
    out << "POINTS " << pts.size() << " double\n";
    char buf[128];
    for (const Vec3& p : pts) {
        std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", p.x, p.y, p.z);
        out << buf;
    }
}

} // namespace

void write_hex_mesh_vtk(const HexMesh& mesh, const std::string& path) {
    PointPool pool;
    std::vector<std::array<std::size_t, 8>> cells;
    cells.reserve(mesh.cells.size());
    for (const HexCell& c : mesh.cells) {
        Box b = mesh.cell_box(c);
        // VTK hexahedron ordering: bottom quad CCW, then top quad.
        cells.push_back({pool.id({b.lo.x, b.lo.y, b.lo.z}), pool.id({b.hi.x, b.lo.y, b.lo.z}),
                         pool.id({b.hi.x, b.hi.y, b.lo.z}), pool.id({b.lo.x, b.hi.y, b.lo.z}),
                         pool.id({b.lo.x, b.lo.y, b.hi.z}), pool.id({b.hi.x, b.lo.y, b.hi.z}),
                         pool.id({b.hi.x, b.hi.y, b.hi.z}), pool.id({b.lo.x, b.hi.y, b.hi.z})});
    }

    std::ofstream out = open_out(path);
    out << "# vtk DataFile Version 3.0\n";
    out << "castellated hex mesh (mm)\n";
    out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
    write_points(out, pool.points());
    out << "CELLS " << cells.size() << " " << cells.size() * 9 << "\n";
    for (const auto& c : cells) {
        out << "8";
        for (std::size_t v : c) out << " " << v;
        out << "\n";
    }
    out << "CELL_TYPES " << cells.size() << "\n";
    for (std::size_t i = 0; i < cells.size(); ++i) out << "12\n";
    out << "CELL_DATA " << cells.size() << "\n";
    out << "SCALARS level int 1\nLOOKUP_TABLE default\n";
    for (const HexCell& c : mesh.cells) out << static_cast<int>(c.level) << "\n";
    out << "SCALARS surface int 1\nLOOKUP_TABLE default\n";
    for (const HexCell& c : mesh.cells) out << (c.surface ? 1 : 0) << "\n";
}

void write_boundary_faces_vtk(const std::vector<MeshFace>& faces, const std::string& path) {
    PointPool pool;
    std::vector<std::array<std::size_t, 4>> quads;
    quads.reserve(faces.size());
    for (const MeshFace& f : faces) {
        quads.push_back({pool.id(f.corners[0]), pool.id(f.corners[1]), pool.id(f.corners[2]),
                         pool.id(f.corners[3])});
    }
    std::ofstream out = open_out(path);
    out << "# vtk DataFile Version 3.0\n";
    out << "boundary patches (mm)\n";
    out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
    write_points(out, pool.points());
    out << "CELLS " << quads.size() << " " << quads.size() * 5 << "\n";
    for (const auto& q : quads) {
        out << "4";
        for (std::size_t v : q) out << " " << v;
        out << "\n";
    }
    out << "CELL_TYPES " << quads.size() << "\n";
    for (std::size_t i = 0; i < quads.size(); ++i) out << "9\n";
    out << "CELL_DATA " << quads.size() << "\n";
    out << "SCALARS patch int 1\nLOOKUP_TABLE default\n";
    for (const MeshFace& f : faces) out << static_cast<int>(f.patch) << "\n";
}

} // namespace anvil
