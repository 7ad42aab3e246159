#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <variant>

#include "anvil/flow.hpp"
#include "anvil/geometry.hpp"
#include "anvil/hex_mesh.hpp"
#include "anvil/mesh_query.hpp"

using namespace anvil;

namespace {

constexpr double kPi = std::numbers::pi;

TriMesh make_sphere(const Vec3& center, double radius, int segments = 48) {
    std::vector<double> xs, rs;
    for (int k = 0; k <= segments; ++k) {
        double phi = kPi * static_cast<double>(k) / segments;
        xs.push_back(center.x - radius * std::cos(phi));
        rs.push_back(radius * std::sin(phi));
    }
    TriMesh m = revolve_stations(xs, rs, segments);
    for (Vec3& v : m.vertices) {
        v.y += center.y;
        v.z += center.z;
    }
    return m;
}

TriMesh make_box_mesh(const Box& b) {
    const Vec3& lo = b.lo;
    const Vec3& hi = b.hi;
    TriMesh m;
    m.vertices = {{lo.x, lo.y, lo.z}, {hi.x, lo.y, lo.z}, {hi.x, hi.y, lo.z},
                  {lo.x, hi.y, lo.z}, {lo.x, lo.y, hi.z}, {hi.x, lo.y, hi.z},
                  {hi.x, hi.y, hi.z}, {lo.x, hi.y, hi.z}};
    auto quad = [&](int a, int bq, int c, int d) {
        m.triangles.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(bq),
                               static_cast<std::uint32_t>(c)});
        m.triangles.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(c),
                               static_cast<std::uint32_t>(d)});
    };
    quad(0, 3, 2, 1); // -z
    quad(4, 5, 6, 7); // +z
    quad(0, 1, 5, 4); // -y
    quad(2, 3, 7, 6); // +y
    quad(1, 2, 6, 5); // +x
    quad(3, 0, 4, 7); // -x
    m.recompute_normals();
    return m;
}

/// Independent inside/outside oracle: generalized winding number via the
/// Van Oosterom-Strackee signed solid angle.
bool winding_inside(const TriMesh& mesh, const Vec3& p) {
    double total = 0.0;
    for (const Tri& t : mesh.triangles) {
        Vec3 a = mesh.vertices[t.a] - p;
        Vec3 b = mesh.vertices[t.b] - p;
        Vec3 c = mesh.vertices[t.c] - p;
        double la = norm(a), lb = norm(b), lc = norm(c);
        double num = dot(a, cross(b, c));
        double den = la * lb * lc + dot(a, b) * lc + dot(b, c) * la + dot(c, a) * lb;
        total += 2.0 * std::atan2(num, den);
    }
    return std::abs(total / (4.0 * kPi)) > 0.5;
}

HexMesh require_mesh(std::variant<HexMesh, MeshFailure> outcome) {
    if (std::holds_alternative<MeshFailure>(outcome)) {
        FAIL(std::get<MeshFailure>(outcome).describe());
    }
    return std::get<HexMesh>(std::move(outcome));
}

std::uint64_t balance_key(int level, int ix, int iy, int iz) {
    return (static_cast<std::uint64_t>(level) << 60) ^
           (static_cast<std::uint64_t>(ix) << 40) ^
           (static_cast<std::uint64_t>(iy) << 20) ^ static_cast<std::uint64_t>(iz);
}

/// Independent 2:1 balance check over face neighbors.
bool balance_holds(const HexMesh& mesh) {
    std::set<std::uint64_t> present;
    for (const HexCell& c : mesh.cells) {
        present.insert(balance_key(c.level, c.ix, c.iy, c.iz));
    }
    const int dax[6] = {0, 0, 1, 1, 2, 2};
    const int dsg[6] = {-1, 1, -1, 1, -1, 1};
    for (const HexCell& c : mesh.cells) {
        for (int d = 0; d < 6; ++d) {
            int np[3] = {c.ix, c.iy, c.iz};
            np[dax[d]] += dsg[d];
            Int3 counts{mesh.base.x << c.level, mesh.base.y << c.level,
                        mesh.base.z << c.level};
            if (np[dax[d]] < 0 || np[dax[d]] >= counts[dax[d]]) continue;
            // A neighbor more than one level away in either direction fails.
            for (int lvl = 0; lvl <= mesh.max_level; ++lvl) {
                if (std::abs(lvl - c.level) <= 1) continue;
                int shift = c.level - lvl;
                int q[3];
                if (shift >= 0) {
                    for (int a = 0; a < 3; ++a) q[a] = np[a] >> shift;
                    if (present.count(balance_key(lvl, q[0], q[1], q[2]))) return false;
                } else {
                    // finer: check whether any descendant cell touching the
                    // face exists at this level
                    int up = -shift;
                    long base[3] = {static_cast<long>(np[0]) << up,
                                    static_cast<long>(np[1]) << up,
                                    static_cast<long>(np[2]) << up};
                    int t1 = (dax[d] + 1) % 3, t2 = (dax[d] + 2) % 3;
                    long face_fix = dsg[d] > 0 ? base[dax[d]]
                                               : base[dax[d]] + (1L << up) - 1;
                    long span = 1L << up;
                    for (long u = 0; u < span; ++u) {
                        for (long v = 0; v < span; ++v) {
                            int q2[3];
                            q2[dax[d]] = static_cast<int>(face_fix);
                            q2[t1] = static_cast<int>(base[t1] + u);
                            q2[t2] = static_cast<int>(base[t2] + v);
                            if (present.count(balance_key(lvl, q2[0], q2[1], q2[2]))) {
                                return false;
                            }
                        }
                    }
                }
            }
        }
    }
    return true;
}

} // namespace

TEST_CASE("block_mesh: 10x10x10 unit box") {
    HexMesh m = block_mesh(Box{{0, 0, 0}, {1, 1, 1}}, {10, 10, 10});
    CHECK(m.cells.size() == 1000);
    auto faces = boundary_faces(m);
    long inlet = 0;
    for (const MeshFace& f : faces) {
        if (f.patch == Patch::Inlet) ++inlet;
    }
    CHECK(inlet == 100);
}

TEST_CASE("block_mesh: single cell has 6 boundary faces") {
    HexMesh m = block_mesh(Box{{0, 0, 0}, {1, 1, 1}}, {1, 1, 1});
    CHECK(m.cells.size() == 1);
    CHECK(boundary_faces(m).size() == 6);
}

TEST_CASE("total face count matches 3 n^2 (n+1) for an n^3 grid") {
    for (int n : {2, 3, 4}) {
        HexMesh m = block_mesh(Box{{0, 0, 0}, {1, 1, 1}}, {n, n, n});
        CAPTURE(n);
        CHECK(total_face_count(m) == 3L * n * n * (n + 1));
    }
    // the documented worked instance
    HexMesh m4 = block_mesh(Box{{0, 0, 0}, {1, 1, 1}}, {4, 4, 4});
    CHECK(total_face_count(m4) == 240);
}

TEST_CASE("point_inside: cube centroid, bbox early-out") {
    TriMesh cube = make_box_mesh(Box{{0, 0, 0}, {1, 1, 1}});
    TriQuery q(cube);
    CHECK(q.point_inside({0.5, 0.5, 0.5}));
    CHECK_FALSE(q.point_inside({5.0, 5.0, 5.0}));
    CHECK_FALSE(q.point_inside({-0.001, 0.5, 0.5}));
}

TEST_CASE("point_inside rejects non-watertight input") {
    TriMesh open_mesh;
    open_mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    open_mesh.triangles = {{0, 1, 2}};
    open_mesh.recompute_normals();
    TriQuery q(open_mesh);
    try {
        q.point_inside({0.1, 0.1, 0.1});
        FAIL("expected NonWatertightInput");
    } catch (const Error& e) {
        CHECK(e.code() == Err::NonWatertightInput);
    }
}

TEST_CASE("point_inside agrees with the winding-number oracle on 10^4 points") {
    HullParams hp;
    hp.control_points_m = {0.05, 0.13, 0.2, 0.16, 0.08, 0.02};
    hp.nose_length_mm = 430.0;
    TriMesh hull = instantiate_hull(hp, RevolveSegments{20, 40});
    TriQuery q(hull);
    Box bb = bounding_box(hull).expanded(50.0);
    Rng rng(99);
    long checked = 0, inside_count = 0;
    while (checked < 10000) {
        Vec3 p{rng.uniform(bb.lo.x, bb.hi.x), rng.uniform(bb.lo.y, bb.hi.y),
               rng.uniform(bb.lo.z, bb.hi.z)};
        bool fast = q.point_inside(p);
        bool oracle = winding_inside(hull, p);
        if (fast != oracle) {
            CAPTURE(p.x);
            CAPTURE(p.y);
            CAPTURE(p.z);
            REQUIRE(fast == oracle);
        }
        inside_count += fast ? 1 : 0;
        ++checked;
    }
    CHECK(inside_count > 100); // sanity: the sample actually straddles the surface
}

TEST_CASE("castellate: sphere removal volume within 10% of analytic") {
    Box domain{{0, 0, 0}, {100, 100, 100}};
    HexMesh bg = block_mesh(domain, {32, 32, 32});
    TriMesh sphere = make_sphere({50, 50, 50}, 25.0);
    HexMesh m = require_mesh(castellate(bg, sphere, 0));

    double cell_vol = (100.0 / 32) * (100.0 / 32) * (100.0 / 32);
    double analytic = (4.0 / 3.0) * kPi * 25.0 * 25.0 * 25.0 / cell_vol;
    CHECK(std::abs(m.stats.removed_cells - analytic) / analytic < 0.10);

    SUBCASE("no retained cell centroid is inside the body") {
        TriQuery q(sphere);
        for (const HexCell& c : m.cells) {
            REQUIRE_FALSE(q.point_inside(m.cell_centroid(c)));
        }
    }
    SUBCASE("winding oracle confirms a sample of centroids is outside") {
        Rng rng(5);
        for (int i = 0; i < 500; ++i) {
            const HexCell& c = m.cells[rng.below(m.cells.size())];
            REQUIRE_FALSE(winding_inside(sphere, m.cell_centroid(c)));
        }
    }
    SUBCASE("cell accounting partitions the domain exactly") {
        CHECK(m.stats.fluid_units + m.stats.surface_units + m.stats.removed_units ==
              m.stats.total_units);
        CHECK(m.stats.total_units == 32ULL * 32 * 32);
    }
}

TEST_CASE("castellate: empty body returns the background unchanged") {
    HexMesh bg = block_mesh(Box{{0, 0, 0}, {10, 20, 30}}, {4, 5, 6});
    HexMesh m = require_mesh(castellate(bg, TriMesh{}, 2));
    CHECK(m.cells.size() == bg.cells.size());
    CHECK(m.max_level == bg.max_level);
    CHECK(m.stats.fluid_units == bg.stats.fluid_units);
}

TEST_CASE("castellate: under-resolved body fails with a Castellation failure") {
    Box domain{{0, 0, 0}, {100, 100, 100}};
    HexMesh bg = block_mesh(domain, {8, 8, 8}); // 12.5 mm cells
    TriMesh small_sphere = make_sphere({50, 50, 50}, 6.0, 24); // ~1 cell across
    auto outcome = castellate(bg, small_sphere, 0);
    REQUIRE(std::holds_alternative<MeshFailure>(outcome));
    const MeshFailure& f = std::get<MeshFailure>(outcome);
    CHECK(f.stage == MeshStage::Castellation);
    CHECK(f.occupied_base_cells < 8);
}

TEST_CASE("castellate with refinement: balance, accounting, single region") {
    Box domain{{0, 0, 0}, {120, 80, 80}};
    HexMesh bg = block_mesh(domain, {24, 16, 16});
    TriMesh sphere = make_sphere({60, 40, 40}, 18.0);
    HexMesh m = require_mesh(castellate(bg, sphere, 2));

    CHECK(m.max_level == 2);
    CHECK(balance_holds(m));
    CHECK(m.stats.fluid_units + m.stats.surface_units + m.stats.removed_units ==
          m.stats.total_units);
    CHECK(m.stats.total_units == static_cast<std::uint64_t>(24) * 16 * 16 * 8 * 8);

    // Refined cells exist and are finer near the surface.
    long fine = 0, surface_cells = 0;
    for (const HexCell& c : m.cells) {
        if (c.level == 2) ++fine;
        if (c.surface) {
            ++surface_cells;
            CHECK(c.level == 2);
        }
    }
    CHECK(fine > 0);
    CHECK(surface_cells > 0);

    // Every body-patch face sits within one cell diagonal of the surface.
    TriQuery q(sphere);
    for (const MeshFace& f : boundary_faces(m)) {
        if (f.patch != Patch::Body) continue;
        Vec3 fc = (f.corners[0] + f.corners[1] + f.corners[2] + f.corners[3]) * 0.25;
        double dist_to_sphere = std::abs(norm(fc - Vec3{60, 40, 40}) - 18.0);
        Vec3 cell_diag = m.cell_size(m.cells[f.owner].level);
        REQUIRE(dist_to_sphere <= norm(cell_diag));
    }
}

TEST_CASE("quality: uniform cubes have aspect 1 and no violations") {
    HexMesh m = block_mesh(Box{{0, 0, 0}, {50, 50, 50}}, {5, 5, 5});
    MeshQualityReport rep = quality_check(m);
    CHECK(rep.max_aspect == doctest::Approx(1.0));
    CHECK(rep.max_nonortho_deg == doctest::Approx(0.0));
    CHECK(rep.max_skewness == doctest::Approx(0.0));
    CHECK(rep.violations() == 0);
}

TEST_CASE("quality: 2:1 interfaces have the template's non-orthogonality and skew") {
    Box domain{{0, 0, 0}, {120, 80, 80}};
    HexMesh bg = block_mesh(domain, {12, 8, 8});
    TriMesh sphere = make_sphere({60, 40, 40}, 22.0);
    HexMesh m = require_mesh(castellate(bg, sphere, 1));
    MeshQualityReport rep = quality_check(m);

    // Geometric oracle for the refinement template: fine center to coarse
    // center across a 2:1 face is (3h/4, h/4, h/4) in fine units.
    double cos_angle = 3.0 / std::sqrt(11.0);
    double oracle_deg = std::acos(cos_angle) * 180.0 / kPi;
    double oracle_skew = (std::sqrt(2.0) / 12.0) / (std::sqrt(11.0) / 4.0);

    CHECK(rep.max_nonortho_deg <= 45.0);
    CHECK(rep.max_nonortho_deg == doctest::Approx(oracle_deg).epsilon(1e-9));
    CHECK(rep.max_skewness == doctest::Approx(oracle_skew).epsilon(1e-9));
    CHECK(rep.violations() == 0); // well under the 65 deg / 4.0 defaults
}

TEST_CASE("quality: an injected sliver is reported exactly once") {
    std::vector<Box> boxes;
    for (int i = 0; i < 125; ++i) {
        double x = static_cast<double>(i % 5);
        double y = static_cast<double>((i / 5) % 5);
        double z = static_cast<double>(i / 25);
        boxes.push_back(Box{{x, y, z}, {x + 1, y + 1, z + 1}});
    }
    boxes.push_back(Box{{10, 10, 10}, {11, 11, 10.005}}); // aspect 200
    double worst = 0.0;
    CHECK(aspect_violations(boxes, 100.0, &worst) == 1);
    CHECK(worst == doctest::Approx(200.0));
}

TEST_CASE("auto_mesh: resolvable body succeeds on the first attempt") {
    TriMesh sphere = make_sphere({0, 0, 0}, 40.0);
    MeshSpec spec;
    spec.domain_scale = {0.75, 1.5, 0.75};
    spec.base_cells = {20, 12, 12};
    spec.surface_refinement_levels = 1;
    spec.max_retries = 3;
    AutoMeshResult res = auto_mesh(sphere, spec);
    CHECK(res.attempts.size() == 1);
    CHECK(res.attempts[0].success);
    CHECK(res.mesh.cells.size() > 0);
}

TEST_CASE("auto_mesh: thin plate needs the logged doubling sequence") {
    // 320 x 320 x 6 mm plate: no base-cell centroid falls inside until the
    // grid has been refined; the doubling policy must kick in at least once.
    TriMesh plate = make_box_mesh(Box{{0, 0, 1}, {320, 320, 7}});
    MeshSpec spec;
    spec.domain_scale = {0.5, 0.5, 0.5};
    spec.base_cells = {8, 8, 8};
    spec.surface_refinement_levels = 0;
    spec.max_retries = 5;
    AutoMeshResult res = auto_mesh(plate, spec);
    REQUIRE(res.attempts.size() >= 2);
    for (std::size_t i = 0; i + 1 < res.attempts.size(); ++i) {
        CHECK_FALSE(res.attempts[i].success);
        REQUIRE(res.attempts[i].failure.has_value());
        CHECK(res.attempts[i].failure->stage == MeshStage::Castellation);
        // doubling policy: per-axis counts double between attempts
        CHECK(res.attempts[i + 1].base_cells.x == res.attempts[i].base_cells.x * 2);
        CHECK(res.attempts[i + 1].base_cells.y == res.attempts[i].base_cells.y * 2);
        CHECK(res.attempts[i + 1].base_cells.z == res.attempts[i].base_cells.z * 2);
    }
    CHECK(res.attempts.back().success);
}

TEST_CASE("auto_mesh: degenerate body exhausts exactly max_retries attempts") {
    // A closed but essentially zero-thickness body never encloses a centroid.
    TriMesh foil = make_box_mesh(Box{{0, 0, 0}, {300, 300, 1e-4}});
    MeshSpec spec;
    spec.domain_scale = {0.5, 0.5, 0.5};
    spec.base_cells = {8, 8, 8};
    spec.surface_refinement_levels = 0;
    spec.max_retries = 2;
    try {
        auto_mesh(foil, spec);
        FAIL("expected AutoMeshExhausted");
    } catch (const AutoMeshExhaustedError& e) {
        CHECK(e.code() == Err::AutoMeshExhausted);
        REQUIRE(e.attempts().size() == 2);
        CHECK_FALSE(e.attempts()[0].success);
        CHECK_FALSE(e.attempts()[1].success);
    }
}

TEST_CASE("flood fill from the inlet reaches every fluid cell") {
    Box domain{{0, 0, 0}, {120, 80, 80}};
    HexMesh bg = block_mesh(domain, {24, 16, 16});
    TriMesh sphere = make_sphere({60, 40, 40}, 18.0);
    HexMesh m = require_mesh(castellate(bg, sphere, 1));

    // Independent reachability check on the final mesh.
    std::set<std::uint64_t> present;
    for (const HexCell& c : m.cells) {
        present.insert(balance_key(c.level, c.ix, c.iy, c.iz));
    }
    std::vector<std::size_t> stack;
    std::set<std::uint64_t> seen;
    for (std::size_t i = 0; i < m.cells.size(); ++i) {
        if (m.cells[i].ix == 0) {
            stack.push_back(i);
            seen.insert(balance_key(m.cells[i].level, m.cells[i].ix, m.cells[i].iy,
                                    m.cells[i].iz));
        }
    }
    // Geometric adjacency: two cells are neighbors when their boxes share a
    // face (overlap in 2 axes, touch in 1).
    auto touching = [&](const HexCell& a, const HexCell& b) {
        Box ba = m.cell_box(a), bb = m.cell_box(b);
        int touch_axis = -1;
        for (int ax = 0; ax < 3; ++ax) {
            if (std::abs(ba.hi[ax] - bb.lo[ax]) < 1e-9 ||
                std::abs(bb.hi[ax] - ba.lo[ax]) < 1e-9) {
                touch_axis = ax;
            }
        }
        if (touch_axis < 0) return false;
        for (int ax = 0; ax < 3; ++ax) {
            if (ax == touch_axis) continue;
            if (ba.lo[ax] >= bb.hi[ax] - 1e-9 || bb.lo[ax] >= ba.hi[ax] - 1e-9) return false;
        }
        return true;
    };
    // Quadratic reachability over the (small) cell set.
    bool grew = true;
    std::vector<char> reached(m.cells.size(), 0);
    for (std::size_t i : stack) reached[i] = 1;
    while (grew) {
        grew = false;
        for (std::size_t i = 0; i < m.cells.size(); ++i) {
            if (reached[i]) continue;
            for (std::size_t j = 0; j < m.cells.size(); ++j) {
                if (reached[j] && touching(m.cells[i], m.cells[j])) {
                    reached[i] = 1;
                    grew = true;
                    break;
                }
            }
        }
    }
    for (std::size_t i = 0; i < m.cells.size(); ++i) {
        REQUIRE(reached[i] == 1);
    }
}

TEST_CASE("make_domain and cubic_base_counts produce a cubic-cell inlet-first box") {
    Box bbox{{0, -200, -200}, {1000, 200, 200}};
    Box domain = make_domain(bbox, DomainScale{1.0, 2.0, 1.25});
    CHECK(domain.lo.x == doctest::Approx(-1000.0));
    CHECK(domain.hi.x == doctest::Approx(3000.0));
    CHECK(domain.strictly_contains(bbox));

    Int3 counts = cubic_base_counts(domain, {32, 12, 12});
    Vec3 ext = domain.extent();
    double hx = ext.x / counts.x, hy = ext.y / counts.y, hz = ext.z / counts.z;
    CHECK(hx == doctest::Approx(hy));
    CHECK(hx == doctest::Approx(hz));
    CHECK(counts.x >= 32);
    CHECK(domain.strictly_contains(bbox));
}

TEST_CASE("castellation is identical for any worker count") {
    Box domain{{0, 0, 0}, {120, 80, 80}};
    HexMesh bg = block_mesh(domain, {24, 16, 16});
    TriMesh sphere = make_sphere({60, 40, 40}, 18.0);
    CastellateOptions one;
    one.workers = 1;
    CastellateOptions many;
    many.workers = 8;
    HexMesh a = require_mesh(castellate(bg, sphere, 1, one));
    HexMesh b = require_mesh(castellate(bg, sphere, 1, many));
    REQUIRE(a.cells.size() == b.cells.size());
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        CHECK(a.cells[i].ix == b.cells[i].ix);
        CHECK(a.cells[i].iy == b.cells[i].iy);
        CHECK(a.cells[i].iz == b.cells[i].iz);
        CHECK(a.cells[i].level == b.cells[i].level);
    }
    CHECK(a.stats.removed_cells == b.stats.removed_cells);
    CHECK(a.base_inside == b.base_inside);
}
