#include "anvil/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace anvil {

using nlohmann::json;

namespace {
constexpr double kPi = std::numbers::pi;
// Interior revolve rings thinner than this are clamped so pinched profiles
// still tessellate as a manifold neck instead of degenerate triangles.
constexpr double kRadiusFloorMm = 1e-4;
} // namespace

// ---------------------------------------------------------------------------
// TriMesh utilities
// ---------------------------------------------------------------------------

void TriMesh::recompute_normals() {
    normals.resize(triangles.size());
    for (std::size_t t = 0; t < triangles.size(); ++t) {
        const Tri& tri = triangles[t];
        Vec3 n = cross(vertices[tri.b] - vertices[tri.a], vertices[tri.c] - vertices[tri.a]);
        normals[t] = normalized(n);
    }
}

WatertightReport check_watertight(const TriMesh& mesh) {
    WatertightReport rep;
    if (mesh.triangles.empty()) {
        return rep;
    }
    struct EdgeUse {
        long forward = 0;
        long backward = 0;
    };
    std::unordered_map<std::uint64_t, EdgeUse> edges;
    edges.reserve(mesh.triangles.size() * 3);
    auto key = [](std::uint32_t a, std::uint32_t b) {
        std::uint32_t lo = std::min(a, b), hi = std::max(a, b);
        return (static_cast<std::uint64_t>(lo) << 32) | hi;
    };
    auto visit = [&](std::uint32_t a, std::uint32_t b) {
        EdgeUse& u = edges[key(a, b)];
        (a < b ? u.forward : u.backward) += 1;
    };
    for (const Tri& t : mesh.triangles) {
        visit(t.a, t.b);
        visit(t.b, t.c);
        visit(t.c, t.a);
    }
    rep.watertight = true;
    rep.oriented = true;
    for (const auto& [k, u] : edges) {
        long total = u.forward + u.backward;
        if (total == 1) {
            ++rep.boundary_edges;
            rep.watertight = false;
            rep.oriented = false;
        } else if (total != 2) {
            ++rep.nonmanifold_edges;
            rep.watertight = false;
            rep.oriented = false;
        } else if (u.forward != 1 || u.backward != 1) {
            // Two uses in the same direction: inconsistent winding.
            rep.oriented = false;
        }
    }
    return rep;
}

double signed_volume_mm3(const TriMesh& mesh) {
    double vol = 0.0;
    for (const Tri& t : mesh.triangles) {
        const Vec3& a = mesh.vertices[t.a];
        const Vec3& b = mesh.vertices[t.b];
        const Vec3& c = mesh.vertices[t.c];
        vol += dot(a, cross(b, c));
    }
    return vol / 6.0;
}

Box bounding_box(const TriMesh& mesh) {
    Box box{{0, 0, 0}, {0, 0, 0}};
    if (mesh.vertices.empty()) {
        return box;
    }
    box.lo = box.hi = mesh.vertices.front();
    for (const Vec3& v : mesh.vertices) {
        for (int a = 0; a < 3; ++a) {
            box.lo[a] = std::min(box.lo[a], v[a]);
            box.hi[a] = std::max(box.hi[a], v[a]);
        }
    }
    return box;
}

long euler_characteristic(const TriMesh& mesh) {
    std::unordered_map<std::uint64_t, int> edges;
    edges.reserve(mesh.triangles.size() * 3);
    auto key = [](std::uint32_t a, std::uint32_t b) {
        std::uint32_t lo = std::min(a, b), hi = std::max(a, b);
        return (static_cast<std::uint64_t>(lo) << 32) | hi;
    };
    for (const Tri& t : mesh.triangles) {
        edges[key(t.a, t.b)] = 1;
        edges[key(t.b, t.c)] = 1;
        edges[key(t.c, t.a)] = 1;
    }
    long v = static_cast<long>(mesh.vertices.size());
    long e = static_cast<long>(edges.size());
    long f = static_cast<long>(mesh.triangles.size());
    return v - e + f;
}

TriMesh weld_vertices(const TriMesh& mesh, double tolerance_mm) {
    TriMesh out;
    if (mesh.vertices.empty()) {
        return out;
    }
    const double inv = 1.0 / tolerance_mm;
    struct CellKey {
        long long x, y, z;
        bool operator==(const CellKey& o) const { return x == o.x && y == o.y && z == o.z; }
    };
    struct CellHash {
        std::size_t operator()(const CellKey& k) const {
            std::uint64_t h = 1469598103934665603ULL;
            for (long long v : {k.x, k.y, k.z}) {
                h ^= static_cast<std::uint64_t>(v);
                h *= 1099511628211ULL;
            }
            return static_cast<std::size_t>(h);
        }
    };
    std::unordered_map<CellKey, std::vector<std::uint32_t>, CellHash> grid;
    std::vector<std::uint32_t> remap(mesh.vertices.size());

    auto cell_of = [&](const Vec3& p) {
        return CellKey{static_cast<long long>(std::floor(p.x * inv)),
                       static_cast<long long>(std::floor(p.y * inv)),
                       static_cast<long long>(std::floor(p.z * inv))};
    };

    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& p = mesh.vertices[i];
        CellKey c = cell_of(p);
        std::uint32_t found = UINT32_MAX;
        for (long long dx = -1; dx <= 1 && found == UINT32_MAX; ++dx) {
            for (long long dy = -1; dy <= 1 && found == UINT32_MAX; ++dy) {
                for (long long dz = -1; dz <= 1 && found == UINT32_MAX; ++dz) {
                    auto it = grid.find(CellKey{c.x + dx, c.y + dy, c.z + dz});
                    if (it == grid.end()) continue;
                    for (std::uint32_t idx : it->second) {
                        if (norm(out.vertices[idx] - p) <= tolerance_mm) {
                            found = idx;
                            break;
                        }
                    }
                }
            }
        }
        if (found == UINT32_MAX) {
            found = static_cast<std::uint32_t>(out.vertices.size());
            out.vertices.push_back(p);
            grid[c].push_back(found);
        }
        remap[i] = found;
    }

    out.triangles.reserve(mesh.triangles.size());
    for (const Tri& t : mesh.triangles) {
        Tri m{remap[t.a], remap[t.b], remap[t.c]};
        if (m.a == m.b || m.b == m.c || m.c == m.a) {
            continue; // collapsed by welding
        }
        out.triangles.push_back(m);
    }
    out.recompute_normals();
    return out;
}

// ---------------------------------------------------------------------------
// Parameter table
// ---------------------------------------------------------------------------

ParameterTable::ParameterTable(std::vector<ParameterEntry> entries)
    : entries_(std::move(entries)) {
    std::unordered_map<std::string, int> seen;
    for (const auto& e : entries_) {
        if (seen.count(e.name)) {
            throw Error(Err::MalformedJson, "duplicate parameter name '" + e.name + "'");
        }
        seen[e.name] = 1;
        if (!(e.min_mm <= e.value_mm && e.value_mm <= e.max_mm)) {
            throw Error(Err::OutOfBounds,
                        "parameter '" + e.name + "' default outside [min, max]");
        }
    }
}

ParameterTable ParameterTable::from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(Err::MalformedJson, e.what());
    }
    if (!j.is_object() || !j.contains("Spreadsheet") || !j["Spreadsheet"].is_array()) {
        throw Error(Err::MalformedJson, "parameter table needs a \"Spreadsheet\" array");
    }
    std::vector<ParameterEntry> entries;
    for (const auto& row : j["Spreadsheet"]) {
        ParameterEntry e;
        if (!row.contains("name") || !row.contains("default") || !row.contains("min") ||
            !row.contains("max")) {
            throw Error(Err::MalformedJson, "Spreadsheet rows need name/default/min/max");
        }
        e.name = row["name"].get<std::string>();
        e.value_mm = row["default"].get<double>();
        e.min_mm = row["min"].get<double>();
        e.max_mm = row["max"].get<double>();
        entries.push_back(e);
    }
    return ParameterTable(std::move(entries));
}

ParameterTable ParameterTable::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Err::IoFailure, "cannot open parameter table: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

bool ParameterTable::has(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return true;
    }
    return false;
}

const ParameterEntry& ParameterTable::at(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return e;
    }
    throw Error(Err::UnknownParameter, "parameter '" + name + "' not in table");
}

ParameterTable apply_parameters(const ParameterTable& table,
                                const std::map<std::string, double>& assignment) {
    std::vector<ParameterEntry> entries = table.entries();
    for (const auto& [name, value] : assignment) {
        bool found = false;
        for (auto& e : entries) {
            if (e.name != name) continue;
            if (value < e.min_mm || value > e.max_mm) {
                std::ostringstream os;
                os << "parameter '" << name << "' = " << value << " outside ["
                   << e.min_mm << ", " << e.max_mm << "]";
                throw Error(Err::OutOfBounds, os.str());
            }
            e.value_mm = value;
            found = true;
            break;
        }
        if (!found) {
            throw Error(Err::UnknownParameter, "parameter '" + name + "' not in table");
        }
    }
    return ParameterTable(std::move(entries));
}

ParameterTable revolved_hull_table() {
    std::vector<ParameterEntry> e;
    for (int i = 1; i <= 6; ++i) {
        e.push_back({"cp" + std::to_string(i), 100.0, 0.0, 200.0});
    }
    e.push_back({"nose_length", 500.0, 10.0, 900.0});
    return ParameterTable(std::move(e));
}

ParameterTable winged_body_table() {
    return ParameterTable({{"nose_radius", 450.0, 100.0, 800.0},
                           {"fuselage_length", 450.0, 100.0, 800.0},
                           {"tail_length", 450.0, 100.0, 800.0},
                           {"thickness_wing", 27.5, 5.0, 50.0},
                           {"half_span", 125.0, 50.0, 200.0},
                           {"chord", 125.0, 50.0, 200.0}});
}

// ---------------------------------------------------------------------------
// Profile curve: cubic Hermite with zero knot slopes. Monotone between knots,
// bounded by the knot values (never dips below zero for non-negative radii),
// and pointwise monotone in every knot value, which makes the enclosed volume
// monotone in each control point.
// ---------------------------------------------------------------------------

double ProfileCurve::eval(double x) const {
    const auto& xs = knots_x;
    const auto& rs = knots_r;
    if (x <= xs.front()) return rs.front();
    if (x >= xs.back()) return rs.back();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
    double t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    double s = t * t * (3.0 - 2.0 * t);
    return rs[i] + (rs[i + 1] - rs[i]) * s;
}

ProfileCurve hull_profile(const HullParams& p) {
    double nose = p.nose_length_mm;
    double total = p.total_length_mm;
    double tail = total - nose;
    if (!(nose > 0.0) || !(nose < total)) {
        throw Error(Err::OutOfBounds, "nose_length must lie strictly inside (0, total_length)");
    }
    ProfileCurve c;
    c.knots_x.push_back(0.0);
    c.knots_r.push_back(0.0);
    for (int i = 1; i <= 6; ++i) {
        c.knots_x.push_back(nose * (static_cast<double>(i) / 6.0));
        c.knots_r.push_back(p.control_points_m[i - 1] * kMmPerM);
    }
    // Tail: reversed control-point sequence scaled to the tail length, ending
    // at radius zero. Equal nose and tail lengths mirror the body exactly.
    for (int j = 1; j <= 5; ++j) {
        c.knots_x.push_back(nose + tail * (static_cast<double>(j) / 6.0));
        c.knots_r.push_back(p.control_points_m[5 - j] * kMmPerM);
    }
    c.knots_x.push_back(total);
    c.knots_r.push_back(0.0);
    return c;
}

// ---------------------------------------------------------------------------
// Surface of revolution
// ---------------------------------------------------------------------------

TriMesh revolve_stations(const std::vector<double>& station_x,
                         const std::vector<double>& station_r, int angular_segments) {
    if (angular_segments < 3) {
        throw Error(Err::ResolutionTooLow, "need at least 3 angular segments");
    }
    if (station_x.size() < 2 || station_x.size() != station_r.size()) {
        throw Error(Err::ResolutionTooLow, "need at least 2 axial stations");
    }
    const int m = angular_segments;
    const std::size_t ns = station_x.size();

    TriMesh mesh;
    std::vector<double> cosines(m), sines(m);
    for (int j = 0; j < m; ++j) {
        double theta = 2.0 * kPi * static_cast<double>(j) / m;
        cosines[j] = std::cos(theta);
        sines[j] = std::sin(theta);
    }

    // ring_start[k] == UINT32_MAX marks an apex station (single vertex).
    std::vector<std::uint32_t> ring_start(ns);
    std::vector<std::uint32_t> apex_index(ns, UINT32_MAX);
    for (std::size_t k = 0; k < ns; ++k) {
        bool tip = (k == 0 || k + 1 == ns) && station_r[k] <= kRadiusFloorMm;
        if (tip) {
            ring_start[k] = UINT32_MAX;
            apex_index[k] = static_cast<std::uint32_t>(mesh.vertices.size());
            mesh.vertices.push_back({station_x[k], 0.0, 0.0});
        } else {
            double r = std::max(station_r[k], kRadiusFloorMm);
            ring_start[k] = static_cast<std::uint32_t>(mesh.vertices.size());
            for (int j = 0; j < m; ++j) {
                mesh.vertices.push_back({station_x[k], r * cosines[j], r * sines[j]});
            }
        }
    }

    auto ring_vertex = [&](std::size_t k, int j) {
        return ring_start[k] + static_cast<std::uint32_t>(j % m);
    };

    for (std::size_t k = 0; k + 1 < ns; ++k) {
        bool apex_lo = ring_start[k] == UINT32_MAX;
        bool apex_hi = ring_start[k + 1] == UINT32_MAX;
        if (apex_lo && apex_hi) {
            continue;
        }
        for (int j = 0; j < m; ++j) {
            if (apex_lo) {
                mesh.triangles.push_back(
                    {apex_index[k], ring_vertex(k + 1, j + 1), ring_vertex(k + 1, j)});
            } else if (apex_hi) {
                mesh.triangles.push_back(
                    {apex_index[k + 1], ring_vertex(k, j), ring_vertex(k, j + 1)});
            } else {
                std::uint32_t a = ring_vertex(k, j);
                std::uint32_t b = ring_vertex(k + 1, j);
                std::uint32_t c = ring_vertex(k + 1, j + 1);
                std::uint32_t d = ring_vertex(k, j + 1);
                mesh.triangles.push_back({a, c, b});
                mesh.triangles.push_back({a, d, c});
            }
        }
    }
    mesh.recompute_normals();
    return mesh;
}

TriMesh instantiate_hull(const HullParams& p, const RevolveSegments& segments) {
    if (segments.angular < 3) {
        throw Error(Err::ResolutionTooLow, "need at least 3 angular segments");
    }
    if (segments.axial < 2) {
        throw Error(Err::ResolutionTooLow, "need at least 2 axial segments");
    }
    double max_cp = 0.0;
    for (double cp : p.control_points_m) {
        if (cp < 0.0 || cp > 0.2) {
            throw Error(Err::OutOfBounds, "control points must lie in [0, 0.2] m");
        }
        max_cp = std::max(max_cp, cp);
    }
    if (max_cp * kMmPerM <= kRadiusFloorMm) {
        throw Error(Err::DegenerateProfile, "all control points are zero: zero-volume body");
    }

    ProfileCurve profile = hull_profile(p);

    // Axial stations: uniform samples, the exact knot abscissas, and enough
    // interior points per knot interval that steep short noses stay resolved.
    std::vector<double> xs;
    xs.reserve(static_cast<std::size_t>(segments.axial) + 8 * profile.knots_x.size());
    for (int k = 0; k <= segments.axial; ++k) {
        xs.push_back(p.total_length_mm * (static_cast<double>(k) / segments.axial));
    }
    const int per_interval = 10;
    for (std::size_t i = 0; i + 1 < profile.knots_x.size(); ++i) {
        double a = profile.knots_x[i], b = profile.knots_x[i + 1];
        for (int k = 0; k <= per_interval; ++k) {
            xs.push_back(a + (b - a) * (static_cast<double>(k) / per_interval));
        }
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end(),
                         [&](double a, double b) { return std::abs(a - b) < 1e-9; }),
             xs.end());

    std::vector<double> rs(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        rs[i] = profile.eval(xs[i]);
    }
    return revolve_stations(xs, rs, segments.angular);
}

HullParams hull_params_from_table(const ParameterTable& table) {
    HullParams p;
    for (int i = 0; i < 6; ++i) {
        p.control_points_m[i] = table.value("cp" + std::to_string(i + 1)) / kMmPerM;
    }
    p.nose_length_mm = table.value("nose_length");
    return p;
}

// ---------------------------------------------------------------------------
// Winged body
// ---------------------------------------------------------------------------

namespace {

struct Station {
    double x;
    double r;
    bool cylinder; // part of the constant-radius fuselage section
};

struct WingedLayout {
    std::vector<Station> stations;
    std::vector<double> angles; // full circle, sector boundaries exact
    int m1 = 0;                 // angular segments across each wing root
    int m2 = 0;                 // angular segments between the roots
    double theta_h = 0.0;
    double x0 = 0.0, x1 = 0.0;  // wing chord extent
    std::vector<double> wing_x; // cylinder stations spanning [x0, x1]
};

WingedLayout winged_layout(const WingedBodyParams& p, int segments) {
    const double r = p.nose_radius_mm;
    const double h = p.thickness_wing_mm / 2.0;
    WingedLayout L;
    L.theta_h = std::asin(h / r);
    L.x0 = r + p.fuselage_length_mm / 2.0 - p.chord_mm / 2.0;
    L.x1 = L.x0 + p.chord_mm;

    L.m1 = std::max(2, static_cast<int>(std::lround(segments * (2.0 * L.theta_h) / (2.0 * kPi))));
    L.m2 = std::max(4, static_cast<int>(
                           std::lround(segments * (kPi - 2.0 * L.theta_h) / (2.0 * kPi))));

    auto push_sector = [&](double a, double b, int n, bool include_first) {
        for (int j = include_first ? 0 : 1; j <= n; ++j) {
            L.angles.push_back(a + (b - a) * (static_cast<double>(j) / n));
        }
    };
    // Sector boundaries land exactly on the wing-root edges so the body holes
    // and the wing faces share vertices.
    push_sector(-L.theta_h, L.theta_h, L.m1, true);
    push_sector(L.theta_h, kPi - L.theta_h, L.m2, false);
    push_sector(kPi - L.theta_h, kPi + L.theta_h, L.m1, false);
    push_sector(kPi + L.theta_h, 2.0 * kPi - L.theta_h, L.m2, false);
    L.angles.pop_back(); // 2*pi - theta_h wraps onto the first angle

    // Axial stations.
    const int mh = std::max(8, segments / 2);
    const int mcyl = std::max(4, segments / 8);
    const int mt = std::max(8, segments / 4);
    for (int k = 0; k <= mh; ++k) {
        double phi = (kPi / 2.0) * (static_cast<double>(k) / mh);
        L.stations.push_back({r * (1.0 - std::cos(phi)), r * std::sin(phi), k == mh});
    }
    auto push_cyl = [&](double a, double b) {
        double len = b - a;
        if (len <= 0.0) return;
        int n = std::max(1, static_cast<int>(std::lround(mcyl * len / p.fuselage_length_mm)));
        if (std::abs(a - L.x0) < 1e-12 && std::abs(b - L.x1) < 1e-12) {
            n = std::max(2, n);
        }
        for (int k = 1; k <= n; ++k) {
            L.stations.push_back({a + len * (static_cast<double>(k) / n), r, true});
        }
    };
    push_cyl(r, L.x0);
    push_cyl(L.x0, L.x1);
    push_cyl(L.x1, r + p.fuselage_length_mm);
    const double cone_base = r + p.fuselage_length_mm;
    for (int k = 1; k <= mt; ++k) {
        double f = static_cast<double>(k) / mt;
        L.stations.push_back({cone_base + p.tail_length_mm * f, r * (1.0 - f), false});
    }

    for (const Station& s : L.stations) {
        if (s.cylinder && s.x >= L.x0 - 1e-12 && s.x <= L.x1 + 1e-12) {
            L.wing_x.push_back(s.x);
        }
    }
    // The fuselage start ring (hemisphere equator) is a cylinder station too.
    if (std::abs(L.x0 - r) < 1e-12) {
        L.wing_x.insert(L.wing_x.begin(), L.stations[mh].x);
    }
    return L;
}

/// Append a quad as two triangles, winding them so the normal points along
/// `outward` (a hint; only its sign against the geometric normal is used).
void emit_quad(std::vector<Vec3>& soup, const Vec3& a, const Vec3& b, const Vec3& c,
               const Vec3& d, const Vec3& outward) {
    Vec3 n = cross(c - a, b - a);
    bool flip = dot(n, outward) < 0.0;
    auto tri = [&](const Vec3& p, const Vec3& q, const Vec3& r) {
        if (flip) {
            soup.push_back(p);
            soup.push_back(q);
            soup.push_back(r);
        } else {
            soup.push_back(p);
            soup.push_back(r);
            soup.push_back(q);
        }
    };
    tri(a, b, c);
    tri(a, c, d);
}

TriMesh soup_to_mesh(const std::vector<Vec3>& soup) {
    TriMesh raw;
    raw.vertices = soup;
    raw.triangles.reserve(soup.size() / 3);
    for (std::uint32_t i = 0; i + 2 < soup.size(); i += 3) {
        raw.triangles.push_back({i, i + 1, i + 2});
    }
    return weld_vertices(raw, 1e-6);
}

void validate_winged(const WingedBodyParams& p) {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw Error(Err::NonPositiveParam, std::string(name) + " must be > 0");
        }
    };
    positive(p.nose_radius_mm, "nose_radius");
    positive(p.fuselage_length_mm, "fuselage_length");
    positive(p.tail_length_mm, "tail_length");
    positive(p.thickness_wing_mm, "thickness_wing");
    positive(p.half_span_mm, "half_span");
    positive(p.chord_mm, "chord");
    if (p.chord_mm > p.fuselage_length_mm) {
        throw Error(Err::SelfIntersection,
                    "wing chord exceeds the fuselage extent; the slab would cut the nose/tail");
    }
    if (p.thickness_wing_mm / 2.0 >= p.nose_radius_mm) {
        throw Error(Err::SelfIntersection, "wing slab thicker than the fuselage diameter");
    }
}

} // namespace

TriMesh instantiate_winged_body_only(const WingedBodyParams& p, int segments) {
    validate_winged(p);
    WingedLayout L = winged_layout(p, segments);
    std::vector<double> xs, rs;
    for (const Station& s : L.stations) {
        xs.push_back(s.x);
        rs.push_back(s.r);
    }
    return revolve_stations(xs, rs, static_cast<int>(L.angles.size()));
}

TriMesh instantiate_winged(const WingedBodyParams& p, int segments) {
    validate_winged(p);
    if (segments < 8) {
        throw Error(Err::ResolutionTooLow, "need at least 8 angular segments");
    }
    WingedLayout L = winged_layout(p, segments);
    const double r = p.nose_radius_mm;
    const int M = static_cast<int>(L.angles.size());
    const double y_tip = r + p.half_span_mm;

    std::vector<Vec3> soup;

    auto on_ring = [&](const Station& s, int j) {
        double rad = std::max(s.r, kRadiusFloorMm);
        int jj = ((j % M) + M) % M;
        return Vec3{s.x, rad * std::cos(L.angles[jj]), rad * std::sin(L.angles[jj])};
    };

    // Wing-root hole rectangles in (x, angle) space. Wing 1 sits over
    // angles [-theta_h, theta_h] (the +y side), wing 2 over pi +/- theta_h.
    auto in_hole = [&](double x_mid, double ang_mid) {
        if (x_mid <= L.x0 || x_mid >= L.x1) return false;
        double a = std::atan2(std::sin(ang_mid), std::cos(ang_mid)); // wrap to (-pi, pi]
        if (a > -L.theta_h && a < L.theta_h) return true;
        double b = std::abs(a);
        return b > kPi - L.theta_h;
    };

    // Body surface (apexes at both tips).
    const std::size_t ns = L.stations.size();
    for (std::size_t k = 0; k + 1 < ns; ++k) {
        const Station& lo = L.stations[k];
        const Station& hi = L.stations[k + 1];
        bool apex_lo = (k == 0 && lo.r <= kRadiusFloorMm);
        for (int j = 0; j < M; ++j) {
            double ang_mid = L.angles[j] + (j + 1 < M ? (L.angles[j + 1] - L.angles[j])
                                                      : (2.0 * kPi - L.theta_h - L.angles[j])) *
                                               0.5;
            if (lo.cylinder && hi.cylinder && in_hole((lo.x + hi.x) * 0.5, ang_mid)) {
                continue;
            }
            Vec3 a, b, c, d;
            if (apex_lo) {
                a = Vec3{lo.x, 0.0, 0.0};
                b = on_ring(hi, j);
                c = on_ring(hi, j + 1);
                Vec3 outward{-1.0, 0.0, 0.0};
                Vec3 n = cross(c - a, b - a);
                if (dot(n, outward) < 0.0) std::swap(b, c);
                soup.push_back(a);
                soup.push_back(c);
                soup.push_back(b);
                continue;
            }
            bool tail_apex = (k + 2 == ns) && hi.r <= kRadiusFloorMm;
            if (tail_apex) {
                a = Vec3{hi.x, 0.0, 0.0};
                b = on_ring(lo, j);
                c = on_ring(lo, j + 1);
                Vec3 outward{1.0, 0.0, 0.0};
                Vec3 n = cross(c - a, b - a);
                if (dot(n, outward) < 0.0) std::swap(b, c);
                soup.push_back(a);
                soup.push_back(c);
                soup.push_back(b);
                continue;
            }
            a = on_ring(lo, j);
            b = on_ring(hi, j);
            c = on_ring(hi, j + 1);
            d = on_ring(lo, j + 1);
            double mid_ang = ang_mid;
            Vec3 outward{0.0, std::cos(mid_ang), std::sin(mid_ang)};
            emit_quad(soup, a, b, c, d, outward);
        }
    }

    // Wings. Each wing spans one angular sector of the root circle; its faces
    // reuse the body's sector angles and cylinder stations so shared edges
    // weld exactly.
    const int mS = std::max(2, static_cast<int>(std::lround(
                                   segments * p.half_span_mm / (2.0 * kPi * r))));
    struct WingFrame {
        int sector_first; // first angular index of the root arc
        double y_sign;
    };
    const int sectorC_first = L.m1 + L.m2;
    for (const WingFrame wf : {WingFrame{0, 1.0}, WingFrame{sectorC_first, -1.0}}) {
        auto arc_point = [&](int s) {
            double ang = L.angles[(wf.sector_first + s) % M];
            return std::pair<double, double>{r * std::cos(ang), r * std::sin(ang)};
        };
        auto outer_point = [&](int s) {
            auto [ay, az] = arc_point(s);
            (void)ay;
            double z0 = arc_point(0).second;
            double z1 = arc_point(L.m1).second;
            double z = z0 + (z1 - z0) * (static_cast<double>(s) / L.m1);
            // The outer edge is straight; endpoints coincide with the arc's.
            if (s == 0) z = z0;
            if (s == L.m1) z = z1;
            return std::pair<double, double>{wf.y_sign * y_tip, z};
        };
        auto grid_point = [&](double x, int s, int ti) {
            auto [ry, rz] = arc_point(s);
            auto [oy, oz] = outer_point(s);
            double t = static_cast<double>(ti) / mS;
            return Vec3{x, ry + (oy - ry) * t, rz + (oz - rz) * t};
        };

        const auto& wx = L.wing_x;
        // fore (x = x0) and aft (x = x1) faces
        for (int s = 0; s < L.m1; ++s) {
            for (int ti = 0; ti < mS; ++ti) {
                Vec3 a = grid_point(L.x0, s, ti);
                Vec3 b = grid_point(L.x0, s + 1, ti);
                Vec3 c = grid_point(L.x0, s + 1, ti + 1);
                Vec3 d = grid_point(L.x0, s, ti + 1);
                emit_quad(soup, a, b, c, d, {-1.0, 0.0, 0.0});
                a = grid_point(L.x1, s, ti);
                b = grid_point(L.x1, s + 1, ti);
                c = grid_point(L.x1, s + 1, ti + 1);
                d = grid_point(L.x1, s, ti + 1);
                emit_quad(soup, a, b, c, d, {1.0, 0.0, 0.0});
            }
        }
        // top/bottom faces (z extremes of the slab): s = 0 edge and s = m1 edge
        for (int edge_s : {0, L.m1}) {
            auto [ry, rz] = arc_point(edge_s);
            (void)ry;
            double zn = (rz > 0.0) ? 1.0 : -1.0;
            for (std::size_t k = 0; k + 1 < wx.size(); ++k) {
                for (int ti = 0; ti < mS; ++ti) {
                    Vec3 a = grid_point(wx[k], edge_s, ti);
                    Vec3 b = grid_point(wx[k + 1], edge_s, ti);
                    Vec3 c = grid_point(wx[k + 1], edge_s, ti + 1);
                    Vec3 d = grid_point(wx[k], edge_s, ti + 1);
                    emit_quad(soup, a, b, c, d, {0.0, 0.0, zn});
                }
            }
        }
        // tip face (y = +/- y_tip)
        for (std::size_t k = 0; k + 1 < wx.size(); ++k) {
            for (int s = 0; s < L.m1; ++s) {
                Vec3 a = grid_point(wx[k], s, mS);
                Vec3 b = grid_point(wx[k + 1], s, mS);
                Vec3 c = grid_point(wx[k + 1], s + 1, mS);
                Vec3 d = grid_point(wx[k], s + 1, mS);
                emit_quad(soup, a, b, c, d, {0.0, wf.y_sign, 0.0});
            }
        }
    }

    TriMesh mesh = soup_to_mesh(soup);
    if (signed_volume_mm3(mesh) < 0.0) {
        for (Tri& t : mesh.triangles) {
            std::swap(t.b, t.c);
        }
        mesh.recompute_normals();
    }
    return mesh;
}

WingedBodyParams winged_params_from_table(const ParameterTable& table) {
    WingedBodyParams p;
    p.nose_radius_mm = table.value("nose_radius");
    p.fuselage_length_mm = table.value("fuselage_length");
    p.tail_length_mm = table.value("tail_length");
    p.thickness_wing_mm = table.value("thickness_wing");
    p.half_span_mm = table.value("half_span");
    p.chord_mm = table.value("chord");
    return p;
}

} // namespace anvil
