#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "anvil/common.hpp"
#include "anvil/geometry.hpp"

using namespace anvil;

namespace {

constexpr double kPi = std::numbers::pi;

/// Independent volume oracle: composite Simpson quadrature of pi * r(x)^2
/// over the hull axis, evaluated on the same interpolated profile.
double quadrature_volume_mm3(const ProfileCurve& profile, double x0, double x1, int n = 20000) {
    if (n % 2) ++n;
    double h = (x1 - x0) / n;
    auto f = [&](double x) {
        double r = profile.eval(x);
        return r * r;
    };
    double s = f(x0) + f(x1);
    for (int i = 1; i < n; ++i) {
        s += f(x0 + i * h) * (i % 2 ? 4.0 : 2.0);
    }
    return kPi * s * h / 3.0;
}

HullParams make_hull(std::array<double, 6> cps_m, double nose_mm) {
    HullParams p;
    p.control_points_m = cps_m;
    p.nose_length_mm = nose_mm;
    return p;
}

bool positively_oriented(const TriMesh& m) { return signed_volume_mm3(m) > 0.0; }

} // namespace

TEST_CASE("symmetric control points with a central nose mirror across the mid-plane") {
    TriMesh m = instantiate_hull(make_hull({0.1, 0.1, 0.1, 0.1, 0.1, 0.1}, 500.0),
                                 RevolveSegments{48, 96});
    REQUIRE(check_watertight(m).watertight);
    // Every vertex must have a mirror partner at x -> 1000 - x.
    const double total = 1000.0;
    for (const Vec3& v : m.vertices) {
        Vec3 mirrored{total - v.x, v.y, v.z};
        double best = 1e30;
        for (const Vec3& w : m.vertices) {
            best = std::min(best, norm(w - mirrored));
            if (best < 1e-9) break;
        }
        REQUIRE(best < 1e-9);
    }
}

TEST_CASE("all-zero control points raise DegenerateProfile") {
    CHECK_THROWS_AS(instantiate_hull(make_hull({0, 0, 0, 0, 0, 0}, 500.0),
                                     RevolveSegments{64, 128}),
                    const Error&);
    try {
        instantiate_hull(make_hull({0, 0, 0, 0, 0, 0}, 500.0), RevolveSegments{64, 128});
    } catch (const Error& e) {
        CHECK(e.code() == Err::DegenerateProfile);
    }
}

TEST_CASE("fewer than 3 angular segments raise ResolutionTooLow") {
    try {
        instantiate_hull(make_hull({0.1, 0.1, 0.1, 0.1, 0.1, 0.1}, 500.0),
                         RevolveSegments{2, 64});
        FAIL("expected ResolutionTooLow");
    } catch (const Error& e) {
        CHECK(e.code() == Err::ResolutionTooLow);
    }
}

TEST_CASE("hull enclosed volume matches the quadrature oracle within 0.5%") {
    HullParams p = make_hull({0.05, 0.1, 0.15, 0.15, 0.1, 0.05}, 400.0);
    TriMesh m = instantiate_hull(p, RevolveSegments{64, 128});
    REQUIRE(check_watertight(m).watertight);
    double mesh_vol = signed_volume_mm3(m);
    double oracle = quadrature_volume_mm3(hull_profile(p), 0.0, 1000.0);
    CHECK(std::abs(mesh_vol - oracle) / oracle < 0.005);
}

TEST_CASE("hull mesh: nose/tail partition is exact and Euler characteristic is 2") {
    HullParams p = make_hull({0.08, 0.12, 0.2, 0.18, 0.11, 0.03}, 350.0);
    CHECK(p.nose_length_mm + p.tail_length_mm() == p.total_length_mm);
    TriMesh m = instantiate_hull(p, RevolveSegments{32, 48});
    CHECK(euler_characteristic(m) == 2);
    CHECK(positively_oriented(m));
}

TEST_CASE("hull determinism: identical parameters give bit-identical vertices") {
    HullParams p = make_hull({0.03, 0.07, 0.19, 0.02, 0.16, 0.05}, 620.0);
    TriMesh a = instantiate_hull(p, RevolveSegments{40, 80});
    TriMesh b = instantiate_hull(p, RevolveSegments{40, 80});
    REQUIRE(a.vertices.size() == b.vertices.size());
    for (std::size_t i = 0; i < a.vertices.size(); ++i) {
        CHECK(a.vertices[i] == b.vertices[i]); // exact, not approximate
    }
}

TEST_CASE("raising any single control point never shrinks the hull volume") {
    Rng rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        std::array<double, 6> cps{};
        for (double& c : cps) c = rng.uniform(0.005, 0.2);
        double nose = rng.uniform(50.0, 900.0);
        int k = static_cast<int>(rng.below(6));
        double bump = rng.uniform(1e-4, 0.2 - cps[k]);
        if (bump <= 0.0) continue;

        double v0 = signed_volume_mm3(
            instantiate_hull(make_hull(cps, nose), RevolveSegments{32, 64}));
        cps[k] += bump;
        double v1 = signed_volume_mm3(
            instantiate_hull(make_hull(cps, nose), RevolveSegments{32, 64}));
        CAPTURE(trial);
        CHECK(v1 >= v0 - 1e-9 * std::max(1.0, v0));
    }
}

TEST_CASE("random hull draws are watertight and positively oriented") {
    Rng rng(7);
    for (int trial = 0; trial < 120; ++trial) {
        std::array<double, 6> cps{};
        for (double& c : cps) c = rng.uniform(0.001, 0.2);
        double nose = rng.uniform(10.0, 900.0);
        TriMesh m = instantiate_hull(make_hull(cps, nose), RevolveSegments{24, 48});
        WatertightReport rep = check_watertight(m);
        CAPTURE(trial);
        REQUIRE(rep.watertight);
        REQUIRE(rep.oriented);
        REQUIRE(positively_oriented(m));
    }
}

TEST_CASE("winged body at the catalog midpoints is watertight with Euler 2") {
    WingedBodyParams p; // defaults are the midpoints
    TriMesh m = instantiate_winged(p, 64);
    WatertightReport rep = check_watertight(m);
    CHECK(rep.watertight);
    CHECK(rep.oriented);
    CHECK(euler_characteristic(m) == 2);
    CHECK(positively_oriented(m));
}

TEST_CASE("wing chord longer than the fuselage raises SelfIntersection") {
    WingedBodyParams p;
    p.fuselage_length_mm = 100.0;
    p.chord_mm = 150.0;
    try {
        instantiate_winged(p, 64);
        FAIL("expected SelfIntersection");
    } catch (const Error& e) {
        CHECK(e.code() == Err::SelfIntersection);
    }
}

TEST_CASE("non-positive parameters raise NonPositiveParam") {
    WingedBodyParams p;
    p.half_span_mm = 0.0;
    try {
        instantiate_winged(p, 64);
        FAIL("expected NonPositiveParam");
    } catch (const Error& e) {
        CHECK(e.code() == Err::NonPositiveParam);
    }
}

TEST_CASE("body-without-wings volume matches the closed form within 0.5%") {
    WingedBodyParams p;
    TriMesh m = instantiate_winged_body_only(p, 64);
    REQUIRE(check_watertight(m).watertight);
    double r = p.nose_radius_mm;
    double exact = (2.0 / 3.0) * kPi * r * r * r + kPi * r * r * p.fuselage_length_mm +
                   kPi * r * r * p.tail_length_mm / 3.0;
    CHECK(std::abs(signed_volume_mm3(m) - exact) / exact < 0.005);
}

TEST_CASE("random winged draws are watertight and positively oriented") {
    Rng rng(11);
    ParameterTable table = winged_body_table();
    int done = 0;
    while (done < 120) {
        WingedBodyParams p;
        p.nose_radius_mm = rng.uniform(100.0, 800.0);
        p.fuselage_length_mm = rng.uniform(100.0, 800.0);
        p.tail_length_mm = rng.uniform(100.0, 800.0);
        p.thickness_wing_mm = rng.uniform(5.0, 50.0);
        p.half_span_mm = rng.uniform(50.0, 200.0);
        p.chord_mm = rng.uniform(50.0, 200.0);
        if (p.chord_mm > p.fuselage_length_mm) continue; // invalid combination
        ++done;
        TriMesh m = instantiate_winged(p, 32);
        WatertightReport rep = check_watertight(m);
        CAPTURE(done);
        REQUIRE(rep.watertight);
        REQUIRE(rep.oriented);
        REQUIRE(positively_oriented(m));
    }
    (void)table;
}

TEST_CASE("apply_parameters") {
    ParameterTable table = winged_body_table();
    SUBCASE("assignment updates the value") {
        ParameterTable t = apply_parameters(table, {{"chord", 150.0}});
        CHECK(t.value("chord") == doctest::Approx(150.0));
        CHECK(t.value("half_span") == doctest::Approx(125.0)); // untouched
    }
    SUBCASE("out-of-bounds value rejected") {
        try {
            apply_parameters(table, {{"chord", 250.0}});
            FAIL("expected OutOfBounds");
        } catch (const Error& e) {
            CHECK(e.code() == Err::OutOfBounds);
        }
    }
    SUBCASE("unknown name rejected") {
        try {
            apply_parameters(table, {{"wingspan", 100.0}});
            FAIL("expected UnknownParameter");
        } catch (const Error& e) {
            CHECK(e.code() == Err::UnknownParameter);
        }
    }
    SUBCASE("empty assignment is the identity") {
        ParameterTable t = apply_parameters(table, {});
        REQUIRE(t.entries().size() == table.entries().size());
        for (std::size_t i = 0; i < t.entries().size(); ++i) {
            CHECK(t.entries()[i].name == table.entries()[i].name);
            CHECK(t.entries()[i].value_mm == table.entries()[i].value_mm);
        }
    }
}

TEST_CASE("weld never turns a watertight mesh into a leaky one") {
    TriMesh m = instantiate_hull(make_hull({0.1, 0.15, 0.2, 0.18, 0.09, 0.04}, 450.0),
                                 RevolveSegments{24, 48});
    REQUIRE(check_watertight(m).watertight);
    TriMesh w = weld_vertices(m, 1e-6);
    CHECK(check_watertight(w).watertight);
    CHECK(w.triangles.size() == m.triangles.size());
}

TEST_CASE("hull parameters map from the seed table") {
    ParameterTable t = apply_parameters(
        revolved_hull_table(), {{"cp1", 50.0}, {"cp6", 30.0}, {"nose_length", 400.0}});
    HullParams p = hull_params_from_table(t);
    CHECK(p.control_points_m[0] == doctest::Approx(0.05));
    CHECK(p.control_points_m[5] == doctest::Approx(0.03));
    CHECK(p.control_points_m[1] == doctest::Approx(0.1)); // default 100 mm
    CHECK(p.nose_length_mm == doctest::Approx(400.0));
}
