#include "anvil/hex_mesh.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include "anvil/mesh_query.hpp"
#include "anvil/parallel.hpp"

namespace anvil {

namespace {

constexpr int kMaxCoordBits = 19;

std::uint64_t cell_key(int level, int ix, int iy, int iz) {
    return (static_cast<std::uint64_t>(level) << (3 * kMaxCoordBits)) |
           (static_cast<std::uint64_t>(ix) << (2 * kMaxCoordBits)) |
           (static_cast<std::uint64_t>(iy) << kMaxCoordBits) | static_cast<std::uint64_t>(iz);
}

std::uint64_t cell_key(const HexCell& c) { return cell_key(c.level, c.ix, c.iy, c.iz); }

using CellIndex = std::unordered_map<std::uint64_t, std::uint32_t>;

CellIndex build_index(const std::vector<HexCell>& cells) {
    CellIndex idx;
    idx.reserve(cells.size() * 2);
    for (std::uint32_t i = 0; i < cells.size(); ++i) {
        idx.emplace(cell_key(cells[i]), i);
    }
    return idx;
}

const int kDirAxis[6] = {0, 0, 1, 1, 2, 2};
const int kDirSign[6] = {-1, +1, -1, +1, -1, +1};

} // namespace

const char* to_string(Patch p) {
    switch (p) {
        case Patch::Inlet: return "inlet";
        case Patch::Outlet: return "outlet";
        case Patch::Symmetry: return "symmetry";
        case Patch::Body: return "body";
    }
    return "?";
}

const char* to_string(MeshStage s) {
    switch (s) {
        case MeshStage::Castellation: return "castellation";
        case MeshStage::Refinement: return "refinement";
        case MeshStage::Quality: return "quality";
    }
    return "?";
}

std::string MeshFailure::describe() const {
    std::ostringstream os;
    os << to_string(stage) << ": " << code;
    if (occupied_base_cells > 0) os << " (occupied base cells: " << occupied_base_cells << ")";
    if (detail_count > 0) os << " (count: " << detail_count << ")";
    return os.str();
}

// ---------------------------------------------------------------------------
// block_mesh
// ---------------------------------------------------------------------------

HexMesh block_mesh(const Box& domain, Int3 counts) {
    if (counts.x < 1 || counts.y < 1 || counts.z < 1) {
        throw Error(Err::RangeViolation, "base cell counts must be >= 1 per axis");
    }
    HexMesh m;
    m.origin = domain.lo;
    m.base = counts;
    Vec3 ext = domain.extent();
    m.base_cell = {ext.x / counts.x, ext.y / counts.y, ext.z / counts.z};
    m.cells.reserve(static_cast<std::size_t>(counts.product()));
    for (int iz = 0; iz < counts.z; ++iz)
        for (int iy = 0; iy < counts.y; ++iy)
            for (int ix = 0; ix < counts.x; ++ix)
                m.cells.push_back({ix, iy, iz, 0, false});
    m.base_inside.assign(static_cast<std::size_t>(counts.product()), 0);
    m.stats.fluid_units = static_cast<std::uint64_t>(counts.product());
    m.stats.total_units = m.stats.fluid_units;
    return m;
}

// ---------------------------------------------------------------------------
// castellate
// ---------------------------------------------------------------------------

namespace {

enum class CellClass : std::uint8_t { Fluid, Removed, Surf };

struct Castellator {
    const HexMesh& bg;
    const TriQuery& query;
    int levels;
    int workers;

    Int3 counts_at(int level) const {
        return {bg.base.x << level, bg.base.y << level, bg.base.z << level};
    }

    Box box_of(int level, int ix, int iy, int iz) const {
        Vec3 s = bg.cell_size(level);
        Vec3 lo = bg.origin + Vec3{s.x * ix, s.y * iy, s.z * iz};
        return {lo, lo + s};
    }

    CellClass classify(int level, int ix, int iy, int iz, bool* centroid_inside) const {
        Box b = box_of(level, ix, iy, iz);
        bool inside = false;
        CellClass cls;
        if (query.intersects_box(b)) {
            inside = query.point_inside(b.center());
            cls = CellClass::Surf;
        } else {
            inside = query.point_inside(b.center());
            cls = inside ? CellClass::Removed : CellClass::Fluid;
        }
        if (centroid_inside) *centroid_inside = inside;
        return cls;
    }
};

} // namespace

std::variant<HexMesh, MeshFailure> castellate(const HexMesh& background, const TriMesh& body,
                                              int levels, const CastellateOptions& opts) {
    if (body.triangles.empty()) {
        return background; // no-op
    }
    if (levels < 0) {
        throw Error(Err::RangeViolation, "refinement levels must be >= 0");
    }
    Box domain = background.domain();
    Box bbox = bounding_box(body);
    if (!domain.strictly_contains(bbox)) {
        return MeshFailure{MeshStage::Castellation, "body not strictly inside the domain", 0, 0};
    }
    int max_base = std::max({background.base.x, background.base.y, background.base.z});
    if ((static_cast<long>(max_base) << levels) >= (1L << kMaxCoordBits)) {
        return MeshFailure{MeshStage::Refinement, "refined lattice exceeds coordinate budget",
                           0, 0};
    }

    TriQuery query(body);
    Castellator ctx{background, query, levels, opts.workers};

    const Int3 nb = background.base;
    const std::size_t n_base = static_cast<std::size_t>(nb.product());
    std::vector<std::uint8_t> base_class(n_base);
    std::vector<std::uint8_t> base_inside(n_base);

    parallel_for(n_base, opts.workers, [&](std::size_t i) {
        int ix = static_cast<int>(i % nb.x);
        int iy = static_cast<int>((i / nb.x) % nb.y);
        int iz = static_cast<int>(i / (static_cast<std::size_t>(nb.x) * nb.y));
        bool inside = false;
        base_class[i] = static_cast<std::uint8_t>(ctx.classify(0, ix, iy, iz, &inside));
        base_inside[i] = inside ? 1 : 0;
    });

    long occupied = 0;
    for (std::uint8_t v : base_inside) occupied += v;
    if (occupied < 8) {
        return MeshFailure{MeshStage::Castellation,
                           "under-resolved: body interior occupies fewer than 8 base cells",
                           occupied, 0};
    }

    auto unit_of = [&](int level) {
        return static_cast<std::uint64_t>(1) << (3 * (levels - level));
    };

    HexMesh mesh;
    mesh.origin = background.origin;
    mesh.base_cell = background.base_cell;
    mesh.base = nb;
    mesh.max_level = levels;
    mesh.base_inside = base_inside;
    mesh.stats.total_units = static_cast<std::uint64_t>(nb.product()) * unit_of(0);

    std::vector<HexCell> surf;
    for (std::size_t i = 0; i < n_base; ++i) {
        int ix = static_cast<int>(i % nb.x);
        int iy = static_cast<int>((i / nb.x) % nb.y);
        int iz = static_cast<int>(i / (static_cast<std::size_t>(nb.x) * nb.y));
        switch (static_cast<CellClass>(base_class[i])) {
            case CellClass::Fluid:
                mesh.cells.push_back({ix, iy, iz, 0, false});
                break;
            case CellClass::Removed:
                mesh.stats.removed_units += unit_of(0);
                mesh.stats.removed_cells += 1;
                break;
            case CellClass::Surf:
                surf.push_back({ix, iy, iz, 0, true});
                break;
        }
    }

    // Octree refinement of surface cells.
    for (int l = 0; l < levels; ++l) {
        std::vector<HexCell> children;
        children.reserve(surf.size() * 8);
        for (const HexCell& c : surf) {
            for (int dz = 0; dz < 2; ++dz)
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx)
                        children.push_back({c.ix * 2 + dx, c.iy * 2 + dy, c.iz * 2 + dz,
                                            static_cast<std::uint8_t>(l + 1), false});
        }
        std::vector<std::uint8_t> cls(children.size());
        parallel_for(children.size(), opts.workers, [&](std::size_t i) {
            const HexCell& c = children[i];
            cls[i] = static_cast<std::uint8_t>(
                ctx.classify(c.level, c.ix, c.iy, c.iz, nullptr));
        });
        std::vector<HexCell> next_surf;
        for (std::size_t i = 0; i < children.size(); ++i) {
            switch (static_cast<CellClass>(cls[i])) {
                case CellClass::Fluid:
                    mesh.cells.push_back(children[i]);
                    break;
                case CellClass::Removed:
                    mesh.stats.removed_units += unit_of(children[i].level);
                    mesh.stats.removed_cells += 1;
                    break;
                case CellClass::Surf: {
                    HexCell s = children[i];
                    s.surface = true;
                    next_surf.push_back(s);
                    break;
                }
            }
        }
        surf = std::move(next_surf);
    }

    // Final-level surface cells: keep the stair-step outside (centroid out).
    {
        std::vector<std::uint8_t> inside(surf.size());
        parallel_for(surf.size(), opts.workers, [&](std::size_t i) {
            const HexCell& c = surf[i];
            Box b = ctx.box_of(c.level, c.ix, c.iy, c.iz);
            inside[i] = query.point_inside(b.center()) ? 1 : 0;
        });
        for (std::size_t i = 0; i < surf.size(); ++i) {
            if (inside[i]) {
                mesh.stats.removed_units += unit_of(surf[i].level);
                mesh.stats.removed_cells += 1;
            } else {
                mesh.cells.push_back(surf[i]);
            }
        }
    }

    // 2:1 balance: any cell at least two levels coarser than a face neighbor
    // is split. Splits only affect non-surface fluid (surface cells already
    // sit at the finest level).
    CellIndex index = build_index(mesh.cells);
    std::vector<std::uint8_t> alive(mesh.cells.size(), 1);
    bool changed = true;
    while (changed) {
        changed = false;
        const std::size_t count_now = mesh.cells.size();
        for (std::size_t ci = 0; ci < count_now; ++ci) {
            if (!alive[ci]) continue;
            HexCell c = mesh.cells[ci];
            for (int d = 0; d < 6; ++d) {
                int ax = kDirAxis[d];
                Int3 counts = ctx.counts_at(c.level);
                int np[3] = {c.ix, c.iy, c.iz};
                np[ax] += kDirSign[d];
                if (np[ax] < 0 || np[ax] >= counts[ax]) continue;
                // Locate the active cell covering the neighbor position at
                // this level or coarser.
                for (int l2 = c.level; l2 >= 0; --l2) {
                    int shift = c.level - l2;
                    auto it = index.find(
                        cell_key(l2, np[0] >> shift, np[1] >> shift, np[2] >> shift));
                    if (it == index.end()) continue;
                    if (c.level - l2 >= 2 && alive[it->second]) {
                        // Split the coarse neighbor.
                        HexCell coarse = mesh.cells[it->second];
                        alive[it->second] = 0;
                        index.erase(it);
                        for (int dz = 0; dz < 2; ++dz)
                            for (int dy = 0; dy < 2; ++dy)
                                for (int dx = 0; dx < 2; ++dx) {
                                    HexCell child{coarse.ix * 2 + dx, coarse.iy * 2 + dy,
                                                  coarse.iz * 2 + dz,
                                                  static_cast<std::uint8_t>(coarse.level + 1),
                                                  false};
                                    index.emplace(cell_key(child),
                                                  static_cast<std::uint32_t>(mesh.cells.size()));
                                    mesh.cells.push_back(child);
                                    alive.push_back(1);
                                }
                        changed = true;
                    }
                    break;
                }
            }
        }
    }
    {
        std::vector<HexCell> kept;
        kept.reserve(mesh.cells.size());
        for (std::size_t i = 0; i < mesh.cells.size(); ++i) {
            if (alive[i]) kept.push_back(mesh.cells[i]);
        }
        mesh.cells = std::move(kept);
    }

    // Single fluid region: flood fill over face adjacency, keep the largest
    // component (it must contain the inlet face).
    index = build_index(mesh.cells);
    std::vector<int> component(mesh.cells.size(), -1);
    auto neighbors = [&](std::uint32_t ci, std::vector<std::uint32_t>& out) {
        out.clear();
        const HexCell& c = mesh.cells[ci];
        Int3 counts = ctx.counts_at(c.level);
        for (int d = 0; d < 6; ++d) {
            int ax = kDirAxis[d];
            int np[3] = {c.ix, c.iy, c.iz};
            np[ax] += kDirSign[d];
            if (np[ax] < 0 || np[ax] >= counts[ax]) continue;
            auto it = index.find(cell_key(c.level, np[0], np[1], np[2]));
            if (it != index.end()) {
                out.push_back(it->second);
                continue;
            }
            if (c.level > 0) {
                it = index.find(cell_key(c.level - 1, np[0] >> 1, np[1] >> 1, np[2] >> 1));
                if (it != index.end()) {
                    out.push_back(it->second);
                    continue;
                }
            }
            if (c.level < mesh.max_level) {
                // The four face-adjacent children of the neighbor position.
                int base_child[3] = {np[0] * 2, np[1] * 2, np[2] * 2};
                if (kDirSign[d] < 0) base_child[ax] += 1;
                int t1 = (ax + 1) % 3, t2 = (ax + 2) % 3;
                for (int u = 0; u < 2; ++u)
                    for (int v = 0; v < 2; ++v) {
                        int cc[3] = {base_child[0], base_child[1], base_child[2]};
                        cc[t1] += u;
                        cc[t2] += v;
                        auto jt = index.find(cell_key(c.level + 1, cc[0], cc[1], cc[2]));
                        if (jt != index.end()) out.push_back(jt->second);
                    }
            }
        }
    };

    int n_components = 0;
    std::vector<long> comp_sizes;
    std::vector<std::uint8_t> comp_inlet;
    std::vector<std::uint32_t> stack, nbrs;
    for (std::uint32_t start = 0; start < mesh.cells.size(); ++start) {
        if (component[start] >= 0) continue;
        int comp = n_components++;
        comp_sizes.push_back(0);
        comp_inlet.push_back(0);
        stack.push_back(start);
        component[start] = comp;
        while (!stack.empty()) {
            std::uint32_t ci = stack.back();
            stack.pop_back();
            comp_sizes[comp] += 1;
            if (mesh.cells[ci].ix == 0) comp_inlet[comp] = 1;
            neighbors(ci, nbrs);
            for (std::uint32_t nb2 : nbrs) {
                if (component[nb2] < 0) {
                    component[nb2] = comp;
                    stack.push_back(nb2);
                }
            }
        }
    }

    if (n_components > 1) {
        int best = 0;
        for (int c = 1; c < n_components; ++c) {
            if (comp_sizes[c] > comp_sizes[best]) best = c;
        }
        long ties = 0;
        for (int c = 0; c < n_components; ++c) {
            if (comp_sizes[c] == comp_sizes[best]) ++ties;
        }
        if (ties > 1) {
            return MeshFailure{MeshStage::Castellation,
                               "ambiguous fluid regions (equal-size components)", occupied,
                               n_components};
        }
        if (!comp_inlet[best]) {
            return MeshFailure{MeshStage::Castellation,
                               "largest fluid region is not connected to the inlet", occupied,
                               n_components};
        }
        std::vector<HexCell> kept;
        kept.reserve(mesh.cells.size());
        for (std::size_t i = 0; i < mesh.cells.size(); ++i) {
            if (component[i] == best) {
                kept.push_back(mesh.cells[i]);
            } else {
                mesh.stats.removed_units += unit_of(mesh.cells[i].level);
                mesh.stats.removed_cells += 1;
            }
        }
        mesh.cells = std::move(kept);
    }

    for (const HexCell& c : mesh.cells) {
        (c.surface ? mesh.stats.surface_units : mesh.stats.fluid_units) += unit_of(c.level);
    }
    return mesh;
}

// ---------------------------------------------------------------------------
// Faces
// ---------------------------------------------------------------------------

namespace {

std::array<Vec3, 4> face_corners(const Box& b, int dir) {
    const Vec3& lo = b.lo;
    const Vec3& hi = b.hi;
    switch (dir) {
        case 0: return {Vec3{lo.x, lo.y, lo.z}, {lo.x, lo.y, hi.z}, {lo.x, hi.y, hi.z}, {lo.x, hi.y, lo.z}};
        case 1: return {Vec3{hi.x, lo.y, lo.z}, {hi.x, hi.y, lo.z}, {hi.x, hi.y, hi.z}, {hi.x, lo.y, hi.z}};
        case 2: return {Vec3{lo.x, lo.y, lo.z}, {hi.x, lo.y, lo.z}, {hi.x, lo.y, hi.z}, {lo.x, lo.y, hi.z}};
        case 3: return {Vec3{lo.x, hi.y, lo.z}, {lo.x, hi.y, hi.z}, {hi.x, hi.y, hi.z}, {hi.x, hi.y, lo.z}};
        case 4: return {Vec3{lo.x, lo.y, lo.z}, {lo.x, hi.y, lo.z}, {hi.x, hi.y, lo.z}, {hi.x, lo.y, lo.z}};
        default: return {Vec3{lo.x, lo.y, hi.z}, {hi.x, lo.y, hi.z}, {hi.x, hi.y, hi.z}, {lo.x, hi.y, hi.z}};
    }
}

Patch domain_patch(int dir) {
    if (dir == 0) return Patch::Inlet;
    if (dir == 1) return Patch::Outlet;
    return Patch::Symmetry;
}

Box quarter_face_box(const Box& cell, int dir, int u, int v) {
    // The quarter of `cell`'s face in direction `dir`; returned as a
    // degenerate box on the face plane split along the two tangent axes.
    int ax = kDirAxis[dir];
    int t1 = (ax + 1) % 3, t2 = (ax + 2) % 3;
    Vec3 lo = cell.lo, hi = cell.hi;
    double plane = kDirSign[dir] > 0 ? cell.hi[ax] : cell.lo[ax];
    lo[ax] = hi[ax] = plane;
    Vec3 mid = cell.center();
    if (u == 0) hi[t1] = mid[t1]; else lo[t1] = mid[t1];
    if (v == 0) hi[t2] = mid[t2]; else lo[t2] = mid[t2];
    return {lo, hi};
}

std::array<Vec3, 4> flat_box_corners(const Box& b, int dir) {
    Box fat = b;
    return face_corners(fat, dir);
}

} // namespace

std::vector<MeshFace> boundary_faces(const HexMesh& mesh) {
    std::vector<MeshFace> faces;
    CellIndex index = build_index(mesh.cells);
    for (std::uint32_t ci = 0; ci < mesh.cells.size(); ++ci) {
        const HexCell& c = mesh.cells[ci];
        Int3 counts{mesh.base.x << c.level, mesh.base.y << c.level, mesh.base.z << c.level};
        Box cbox = mesh.cell_box(c);
        for (int d = 0; d < 6; ++d) {
            int ax = kDirAxis[d];
            int np[3] = {c.ix, c.iy, c.iz};
            np[ax] += kDirSign[d];
            if (np[ax] < 0 || np[ax] >= counts[ax]) {
                faces.push_back({face_corners(cbox, d), domain_patch(d), ci, d});
                continue;
            }
            if (index.count(cell_key(c.level, np[0], np[1], np[2]))) continue;
            if (c.level > 0 &&
                index.count(cell_key(c.level - 1, np[0] >> 1, np[1] >> 1, np[2] >> 1))) {
                continue;
            }
            bool any_child = false;
            bool missing[2][2] = {{false, false}, {false, false}};
            if (c.level < mesh.max_level) {
                int base_child[3] = {np[0] * 2, np[1] * 2, np[2] * 2};
                if (kDirSign[d] < 0) base_child[ax] += 1;
                int t1 = (ax + 1) % 3, t2 = (ax + 2) % 3;
                for (int u = 0; u < 2; ++u)
                    for (int v = 0; v < 2; ++v) {
                        int cc[3] = {base_child[0], base_child[1], base_child[2]};
                        cc[t1] += u;
                        cc[t2] += v;
                        if (index.count(cell_key(c.level + 1, cc[0], cc[1], cc[2]))) {
                            any_child = true;
                        } else {
                            missing[u][v] = true;
                        }
                    }
            }
            if (!any_child) {
                faces.push_back({face_corners(cbox, d), Patch::Body, ci, d});
                continue;
            }
            int t1 = (ax + 1) % 3, t2 = (ax + 2) % 3;
            (void)t1;
            (void)t2;
            for (int u = 0; u < 2; ++u)
                for (int v = 0; v < 2; ++v) {
                    if (!missing[u][v]) continue;
                    Box qb = quarter_face_box(cbox, d, u, v);
                    faces.push_back({flat_box_corners(qb, d), Patch::Body, ci, d});
                }
        }
    }
    return faces;
}

std::vector<InternalFace> internal_faces(const HexMesh& mesh) {
    std::vector<InternalFace> faces;
    CellIndex index = build_index(mesh.cells);
    for (std::uint32_t ci = 0; ci < mesh.cells.size(); ++ci) {
        const HexCell& c = mesh.cells[ci];
        Int3 counts{mesh.base.x << c.level, mesh.base.y << c.level, mesh.base.z << c.level};
        for (int d = 0; d < 6; ++d) {
            int ax = kDirAxis[d];
            int np[3] = {c.ix, c.iy, c.iz};
            np[ax] += kDirSign[d];
            if (np[ax] < 0 || np[ax] >= counts[ax]) continue;
            auto it = index.find(cell_key(c.level, np[0], np[1], np[2]));
            if (it != index.end()) {
                if (kDirSign[d] > 0) { // count each same-level pair once
                    faces.push_back({ci, it->second, d});
                }
                continue;
            }
            if (c.level > 0) {
                it = index.find(cell_key(c.level - 1, np[0] >> 1, np[1] >> 1, np[2] >> 1));
                if (it != index.end()) {
                    faces.push_back({ci, it->second, d}); // emitted from the finer side
                }
            }
        }
    }
    return faces;
}

long total_face_count(const HexMesh& mesh) {
    return static_cast<long>(boundary_faces(mesh).size()) +
           static_cast<long>(internal_faces(mesh).size());
}

// ---------------------------------------------------------------------------
// Quality
// ---------------------------------------------------------------------------

long aspect_violations(std::span<const Box> cell_boxes, double max_aspect, double* max_seen) {
    long violations = 0;
    double worst = 0.0;
    for (const Box& b : cell_boxes) {
        Vec3 e = b.extent();
        double mn = std::min({e.x, e.y, e.z});
        double mx = std::max({e.x, e.y, e.z});
        double aspect = mn > 0.0 ? mx / mn : std::numeric_limits<double>::infinity();
        worst = std::max(worst, aspect);
        if (aspect > max_aspect) ++violations;
    }
    if (max_seen) *max_seen = worst;
    return violations;
}

MeshQualityReport quality_check(const HexMesh& mesh, const MeshQualityThresholds& thr) {
    MeshQualityReport rep;
    std::vector<std::uint8_t> flagged(mesh.cells.size(), 0);

    std::vector<Box> boxes;
    boxes.reserve(mesh.cells.size());
    for (const HexCell& c : mesh.cells) boxes.push_back(mesh.cell_box(c));
    rep.aspect_violations = aspect_violations(boxes, thr.max_aspect, &rep.max_aspect);
    if (rep.aspect_violations > 0) {
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            Vec3 e = boxes[i].extent();
            if (std::max({e.x, e.y, e.z}) / std::min({e.x, e.y, e.z}) > thr.max_aspect) {
                flagged[i] = 1;
            }
        }
    }

    for (const InternalFace& f : internal_faces(mesh)) {
        const HexCell& ca = mesh.cells[f.a];
        const HexCell& cb = mesh.cells[f.b];
        Vec3 pa = mesh.cell_centroid(ca);
        Vec3 pb = mesh.cell_centroid(cb);
        Vec3 d = pb - pa;
        double dn = norm(d);
        if (dn <= 0.0) continue;
        int ax = kDirAxis[f.dir];
        double along = std::abs(d[ax]);
        double cosang = std::min(1.0, along / dn);
        double ang_deg = std::acos(cosang) * 180.0 / std::numbers::pi;
        rep.max_nonortho_deg = std::max(rep.max_nonortho_deg, ang_deg);
        if (ang_deg > thr.max_nonortho_deg) {
            ++rep.nonortho_violations;
            flagged[f.a] = flagged[f.b] = 1;
        }

        // Skewness: offset between the face centre and where the
        // centroid-to-centroid line pierces the face plane.
        Box face_box = mesh.cell_box(ca);
        double plane = kDirSign[f.dir] > 0 ? face_box.hi[ax] : face_box.lo[ax];
        Vec3 fc = face_box.center();
        fc[ax] = plane;
        double t = (plane - pa[ax]) / (pb[ax] - pa[ax]);
        Vec3 pierce = pa + d * t;
        double skew = norm(fc - pierce) / dn;
        rep.max_skewness = std::max(rep.max_skewness, skew);
        if (skew > thr.max_skewness) {
            ++rep.skew_violations;
            flagged[f.a] = flagged[f.b] = 1;
        }
    }

    for (std::uint32_t i = 0; i < flagged.size(); ++i) {
        if (flagged[i]) rep.flagged_cells.push_back(i);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Auto meshing
// ---------------------------------------------------------------------------

AutoMeshExhaustedError::AutoMeshExhaustedError(std::vector<MeshAttempt> attempts)
    : Error(Err::AutoMeshExhausted,
            "auto-mesh gave up after " + std::to_string(attempts.size()) + " attempts; last: " +
                (attempts.empty() || !attempts.back().failure
                     ? std::string("(none)")
                     : attempts.back().failure->describe())),
      attempts_(std::move(attempts)) {}

Box make_domain(const Box& body_bbox, const DomainScale& scale) {
    Vec3 ext = body_bbox.extent();
    double max_ext = std::max({ext.x, ext.y, ext.z});
    if (!(max_ext > 0.0)) {
        throw Error(Err::RangeViolation, "degenerate body bounding box");
    }
    // Streamwise padding scales with the streamwise length, lateral padding
    // with the larger lateral extent, so thin bodies still get a usable box.
    double len_stream = std::max(ext.x, 0.25 * max_ext);
    double len_lateral = std::max({ext.y, ext.z, 0.25 * max_ext});
    Box d;
    d.lo.x = body_bbox.lo.x - scale.upstream * len_stream;
    d.hi.x = body_bbox.hi.x + scale.downstream * len_stream;
    d.lo.y = body_bbox.lo.y - scale.lateral * len_lateral;
    d.hi.y = body_bbox.hi.y + scale.lateral * len_lateral;
    d.lo.z = body_bbox.lo.z - scale.lateral * len_lateral;
    d.hi.z = body_bbox.hi.z + scale.lateral * len_lateral;
    return d;
}

Int3 cubic_base_counts(Box& domain, Int3 requested) {
    Vec3 ext = domain.extent();
    double h = std::min({ext.x / requested.x, ext.y / requested.y, ext.z / requested.z});
    Int3 counts;
    for (int a = 0; a < 3; ++a) {
        counts[a] = std::max(1, static_cast<int>(std::ceil(ext[a] / h - 1e-9)));
    }
    if (counts.product() > (1LL << 26)) {
        throw Error(Err::RangeViolation,
                    "requested base resolution needs " + std::to_string(counts.product()) +
                        " cells; the domain/base_cells combination is unusable");
    }
    // Grow the box to an exact multiple of h: downstream for x (the inlet
    // distance is part of the configuration), split evenly for y and z.
    domain.hi.x = domain.lo.x + counts.x * h;
    for (int a = 1; a < 3; ++a) {
        double pad = (counts[a] * h - ext[a]) / 2.0;
        domain.lo[a] -= pad;
        domain.hi[a] = domain.lo[a] + counts[a] * h;
    }
    return counts;
}

AutoMeshResult auto_mesh(const TriMesh& body, const MeshSpec& spec,
                         const CastellateOptions& opts) {
    Box domain = make_domain(bounding_box(body), spec.domain_scale);
    Int3 counts = cubic_base_counts(domain, spec.base_cells);

    std::vector<MeshAttempt> attempts;
    for (int attempt = 0; attempt < spec.max_retries; ++attempt) {
        Int3 c{counts.x << attempt, counts.y << attempt, counts.z << attempt};
        MeshAttempt rec{c, spec.surface_refinement_levels, false, std::nullopt};
        if (c.product() > (1LL << 26)) {
            rec.failure = MeshFailure{MeshStage::Refinement,
                                      "doubled grid exceeds the cell budget", 0, 0};
            attempts.push_back(rec);
            continue;
        }
        HexMesh background = block_mesh(domain, c);
        auto outcome = castellate(background, body, spec.surface_refinement_levels, opts);
        if (std::holds_alternative<MeshFailure>(outcome)) {
            rec.failure = std::get<MeshFailure>(outcome);
            attempts.push_back(rec);
            continue;
        }
        HexMesh mesh = std::get<HexMesh>(std::move(outcome));
        MeshQualityReport q = quality_check(mesh);
        if (q.violations() > 0) {
            rec.failure = MeshFailure{MeshStage::Quality, "quality thresholds violated", 0,
                                      q.violations()};
            attempts.push_back(rec);
            continue;
        }
        rec.success = true;
        attempts.push_back(rec);
        return AutoMeshResult{std::move(mesh), std::move(attempts)};
    }
    throw AutoMeshExhaustedError(std::move(attempts));
}

} // namespace anvil
