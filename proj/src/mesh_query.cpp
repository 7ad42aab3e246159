#include "anvil/mesh_query.hpp"

#include <algorithm>
#include <cmath>

namespace anvil {

namespace {

// Akenine-Moller style separating axis test.
bool axis_separates(const Vec3& axis, const Vec3& a, const Vec3& b, const Vec3& c,
                    const Vec3& half) {
    double pa = dot(axis, a);
    double pb = dot(axis, b);
    double pc = dot(axis, c);
    double r = half.x * std::abs(axis.x) + half.y * std::abs(axis.y) + half.z * std::abs(axis.z);
    double mn = std::min({pa, pb, pc});
    double mx = std::max({pa, pb, pc});
    return mn > r || mx < -r;
}

} // namespace

bool triangle_box_overlap(const Vec3& va, const Vec3& vb, const Vec3& vc, const Box& box) {
    Vec3 center = box.center();
    Vec3 half = box.extent() * 0.5;
    Vec3 a = va - center, b = vb - center, c = vc - center;

    // Box face normals.
    for (int ax = 0; ax < 3; ++ax) {
        double mn = std::min({a[ax], b[ax], c[ax]});
        double mx = std::max({a[ax], b[ax], c[ax]});
        if (mn > half[ax] || mx < -half[ax]) return false;
    }
    // Triangle normal.
    Vec3 e0 = b - a, e1 = c - b, e2 = a - c;
    if (axis_separates(cross(e0, e1), a, b, c, half)) return false;
    // Nine edge cross products.
    const Vec3 axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (const Vec3& e : {e0, e1, e2}) {
        for (const Vec3& u : axes) {
            Vec3 axis = cross(u, e);
            if (std::abs(axis.x) + std::abs(axis.y) + std::abs(axis.z) < 1e-30) continue;
            if (axis_separates(axis, a, b, c, half)) return false;
        }
    }
    return true;
}

struct TriQuery::Impl {
    TriMesh mesh;
    Box bounds;
    Int3 dims;
    Vec3 cell;
    bool watertight = false;
    std::vector<std::vector<std::uint32_t>> bins;

    std::size_t bin_index(int ix, int iy, int iz) const {
        return (static_cast<std::size_t>(iz) * dims.y + iy) * dims.x + ix;
    }

    void clamp_cell(const Vec3& p, int& ix, int& iy, int& iz) const {
        ix = std::clamp(static_cast<int>((p.x - bounds.lo.x) / cell.x), 0, dims.x - 1);
        iy = std::clamp(static_cast<int>((p.y - bounds.lo.y) / cell.y), 0, dims.y - 1);
        iz = std::clamp(static_cast<int>((p.z - bounds.lo.z) / cell.z), 0, dims.z - 1);
    }
};

TriQuery::TriQuery(const TriMesh& mesh) {
    auto impl = std::make_shared<Impl>();
    impl->mesh = mesh;
    impl->bounds = bounding_box(mesh).expanded(1e-6);
    impl->watertight = check_watertight(mesh).watertight;
    std::size_t n = std::max<std::size_t>(mesh.triangles.size(), 1);
    int target = std::max(1, static_cast<int>(std::cbrt(static_cast<double>(n) / 2.0)));
    impl->dims = {target, target, target};
    Vec3 ext = impl->bounds.extent();
    impl->cell = {std::max(ext.x, 1e-9) / impl->dims.x, std::max(ext.y, 1e-9) / impl->dims.y,
                  std::max(ext.z, 1e-9) / impl->dims.z};
    impl->bins.resize(static_cast<std::size_t>(impl->dims.x) * impl->dims.y * impl->dims.z);

    for (std::uint32_t t = 0; t < mesh.triangles.size(); ++t) {
        const Tri& tri = mesh.triangles[t];
        Box tb{mesh.vertices[tri.a], mesh.vertices[tri.a]};
        for (std::uint32_t vi : {tri.b, tri.c}) {
            const Vec3& v = mesh.vertices[vi];
            for (int a = 0; a < 3; ++a) {
                tb.lo[a] = std::min(tb.lo[a], v[a]);
                tb.hi[a] = std::max(tb.hi[a], v[a]);
            }
        }
        int lx, ly, lz, hx, hy, hz;
        impl->clamp_cell(tb.lo, lx, ly, lz);
        impl->clamp_cell(tb.hi, hx, hy, hz);
        for (int iz = lz; iz <= hz; ++iz)
            for (int iy = ly; iy <= hy; ++iy)
                for (int ix = lx; ix <= hx; ++ix)
                    impl->bins[impl->bin_index(ix, iy, iz)].push_back(t);
    }
    bounds_ = impl->bounds;
    impl_ = impl;
    mesh_ = &impl_->mesh;
}

void TriQuery::candidates(const Box& box, std::vector<std::uint32_t>& out) const {
    out.clear();
    const Impl& im = *impl_;
    Box q{box.lo, box.hi};
    // Outside the indexed volume: nothing can overlap.
    if (q.hi.x < im.bounds.lo.x || q.lo.x > im.bounds.hi.x || q.hi.y < im.bounds.lo.y ||
        q.lo.y > im.bounds.hi.y || q.hi.z < im.bounds.lo.z || q.lo.z > im.bounds.hi.z) {
        return;
    }
    int lx, ly, lz, hx, hy, hz;
    im.clamp_cell(q.lo, lx, ly, lz);
    im.clamp_cell(q.hi, hx, hy, hz);
    for (int iz = lz; iz <= hz; ++iz)
        for (int iy = ly; iy <= hy; ++iy)
            for (int ix = lx; ix <= hx; ++ix)
                for (std::uint32_t t : im.bins[im.bin_index(ix, iy, iz)])
                    out.push_back(t);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
}

bool TriQuery::intersects_box(const Box& box) const {
    thread_local std::vector<std::uint32_t> cand;
    candidates(box, cand);
    const TriMesh& m = *mesh_;
    for (std::uint32_t t : cand) {
        const Tri& tri = m.triangles[t];
        if (triangle_box_overlap(m.vertices[tri.a], m.vertices[tri.b], m.vertices[tri.c], box)) {
            return true;
        }
    }
    return false;
}

namespace {

enum class HitKind { Miss, Clean, Grazing };

HitKind ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                     const Vec3& c, double scale) {
    // Moller-Trumbore with a conservative "grazing" band around edges,
    // vertices and near-parallel configurations.
    constexpr double kEps = 1e-10;
    Vec3 e1 = b - a, e2 = c - a;
    Vec3 p = cross(dir, e2);
    double det = dot(e1, p);
    double area2 = norm(cross(e1, e2));
    if (std::abs(det) < 1e-12 * std::max(area2, 1e-300)) {
        // Ray (nearly) parallel to the triangle plane. Only suspicious if the
        // triangle is close to the ray; a cheap distance check suffices.
        return HitKind::Miss;
    }
    double inv = 1.0 / det;
    Vec3 s = origin - a;
    double u = dot(s, p) * inv;
    Vec3 q = cross(s, e1);
    double v = dot(dir, q) * inv;
    double t = dot(e2, q) * inv;
    if (u < -kEps || v < -kEps || u + v > 1.0 + kEps) return HitKind::Miss;
    if (t < -kEps * scale) return HitKind::Miss;
    bool grazing = u < kEps || v < kEps || u + v > 1.0 - kEps || std::abs(t) < kEps * scale;
    if (t <= 0.0) return grazing ? HitKind::Grazing : HitKind::Miss;
    return grazing ? HitKind::Grazing : HitKind::Clean;
}

} // namespace

bool TriQuery::point_inside(const Vec3& p) const {
    const Impl& im = *impl_;
    if (!im.watertight) {
        throw Error(Err::NonWatertightInput,
                    "inside/outside classification needs a watertight surface");
    }
    if (!im.bounds.contains(p)) {
        return false; // bbox early-out, no ray cast
    }
    double scale = norm(im.bounds.extent()) + 1.0;

    // Fixed direction table: deterministic retries on grazing hits.
    static const Vec3 kDirs[] = {
        {1.0, 0.0, 0.0},           {0.0, 1.0, 0.0},           {0.0, 0.0, 1.0},
        {0.577350, 0.577350, 0.577350}, {0.267261, 0.534522, 0.801784},
        {-0.801784, 0.267261, 0.534522}, {0.534522, -0.801784, 0.267261},
        {0.218218, 0.436436, -0.872872}, {0.948683, 0.316228, 0.0},
        {0.0, 0.948683, 0.316228}, {0.316228, 0.0, 0.948683},
        {0.688247, -0.229416, 0.688247}, {-0.408248, 0.816497, 0.408248},
        {0.707107, 0.707107, 0.0}, {0.0, -0.707107, 0.707107}, {0.707107, 0.0, -0.707107},
    };

    thread_local std::vector<std::uint32_t> cand;
    const TriMesh& m = *mesh_;
    for (const Vec3& dir : kDirs) {
        // Gather triangles along the ray via the bins of the whole slab the
        // ray passes through (bounded mesh; candidate set from an enclosing
        // box of the ray segment within bounds).
        Box ray_box{p, p};
        for (int a = 0; a < 3; ++a) {
            double reach = dir[a] * scale * 2.0;
            ray_box.lo[a] = std::min(p[a], p[a] + reach);
            ray_box.hi[a] = std::max(p[a], p[a] + reach);
        }
        candidates(ray_box, cand);
        long crossings = 0;
        bool grazing = false;
        for (std::uint32_t t : cand) {
            const Tri& tri = m.triangles[t];
            HitKind h = ray_triangle(p, dir, m.vertices[tri.a], m.vertices[tri.b],
                                     m.vertices[tri.c], scale);
            if (h == HitKind::Grazing) {
                grazing = true;
                break;
            }
            if (h == HitKind::Clean) ++crossings;
        }
        if (!grazing) {
            return (crossings % 2) == 1;
        }
    }
    // All retry directions grazed; fall back to the last parity rather than
    // failing the whole castellation.
    long crossings = 0;
    for (std::uint32_t t : cand) {
        const Tri& tri = m.triangles[t];
        if (ray_triangle(p, kDirs[0], m.vertices[tri.a], m.vertices[tri.b], m.vertices[tri.c],
                         scale) != HitKind::Miss) {
            ++crossings;
        }
    }
    return (crossings % 2) == 1;
}

} // namespace anvil
