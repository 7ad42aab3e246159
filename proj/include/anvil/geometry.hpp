#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "anvil/common.hpp"

namespace anvil {

// ---------------------------------------------------------------------------
// Triangle surface mesh, millimeters. The exchange object between the
// parametric designs, the STL layer and the mesher.
// ---------------------------------------------------------------------------

struct Tri {
    std::uint32_t a = 0, b = 0, c = 0;
};

struct TriMesh {
    std::vector<Vec3> vertices;  // mm
    std::vector<Tri> triangles;
    std::vector<Vec3> normals;   // per triangle, unit length

    bool empty() const { return triangles.empty(); }
    std::size_t triangle_count() const { return triangles.size(); }
    void recompute_normals();
};

struct WatertightReport {
    bool watertight = false;       // every edge shared by exactly two triangles
    bool oriented = false;         // each shared edge traversed once per direction
    long boundary_edges = 0;
    long nonmanifold_edges = 0;
};

WatertightReport check_watertight(const TriMesh& mesh);
double signed_volume_mm3(const TriMesh& mesh);
Box bounding_box(const TriMesh& mesh);
/// V - E + F; 2 for a closed genus-0 surface.
long euler_characteristic(const TriMesh& mesh);

/// Merge vertices closer than `tolerance_mm` (grid quantization) and drop
/// degenerate triangles. Used by the STL reader and the winged-body builder.
TriMesh weld_vertices(const TriMesh& mesh, double tolerance_mm = 1e-6);

// ---------------------------------------------------------------------------
// Parameter table: the named design parameters with defaults and bounds that
// standardize the interface between configs and seed designs.
// ---------------------------------------------------------------------------

struct ParameterEntry {
    std::string name;
    double value_mm = 0.0; // current/default value
    double min_mm = 0.0;
    double max_mm = 0.0;
};

class ParameterTable {
public:
    ParameterTable() = default;
    explicit ParameterTable(std::vector<ParameterEntry> entries);

    /// Load the JSON sidecar: {"Spreadsheet": [{name, default, min, max}, ...]}.
    static ParameterTable from_json(const std::string& json_text);
    static ParameterTable load(const std::string& path);

    const std::vector<ParameterEntry>& entries() const { return entries_; }
    bool has(const std::string& name) const;
    const ParameterEntry& at(const std::string& name) const;
    double value(const std::string& name) const { return at(name).value_mm; }

private:
    std::vector<ParameterEntry> entries_;
};

/// Return a copy of `table` with the assigned names set as current values.
/// Unknown names and out-of-bounds values are rejected.
ParameterTable apply_parameters(const ParameterTable& table,
                                const std::map<std::string, double>& assignment);

/// Built-in seed designs (parameter tables shipped as JSON sidecars mirror
/// these bounds).
ParameterTable revolved_hull_table();
ParameterTable winged_body_table();

// ---------------------------------------------------------------------------
// Revolved control-point hull.
// ---------------------------------------------------------------------------

struct HullParams {
    std::array<double, 6> control_points_m{}; // radial offsets, meters, [0, 0.2]
    double nose_length_mm = 500.0;
    double total_length_mm = 1000.0;

    double tail_length_mm() const { return total_length_mm - nose_length_mm; }
};

struct RevolveSegments {
    int angular = 64;
    int axial = 128;
};

/// Axial profile r(x), both mm. Piecewise cubic with zero slope at the knots:
/// monotone between knots, never overshoots below zero, and raising any knot
/// value never lowers the curve anywhere.
struct ProfileCurve {
    std::vector<double> knots_x;
    std::vector<double> knots_r;

    double eval(double x) const;
};

/// Knot layout for the hull: radius 0 at both tips, the six control points
/// spaced uniformly along the nose, and the tail tracing the reversed
/// control-point sequence scaled to the tail length (so equal nose and tail
/// lengths give a mirror-symmetric body).
ProfileCurve hull_profile(const HullParams& p);

TriMesh instantiate_hull(const HullParams& p, const RevolveSegments& segments);

/// Build HullParams from a parameter table/assignment using the built-in
/// names cp1..cp6 (mm) and nose_length (mm).
HullParams hull_params_from_table(const ParameterTable& table);

// ---------------------------------------------------------------------------
// Winged body: hemispherical nose, cylindrical fuselage, conical tail, two
// rectangular wings attached at mid-fuselage along +/-y.
// ---------------------------------------------------------------------------

struct WingedBodyParams {
    double nose_radius_mm = 450.0;
    double fuselage_length_mm = 450.0;
    double tail_length_mm = 450.0;
    double thickness_wing_mm = 27.5;
    double half_span_mm = 125.0;
    double chord_mm = 125.0;
};

TriMesh instantiate_winged(const WingedBodyParams& p, int segments = 64);

/// The revolved part only (no wings); exposed so the solid volume can be
/// checked against the closed-form hemisphere + cylinder + cone expression.
TriMesh instantiate_winged_body_only(const WingedBodyParams& p, int segments = 64);

WingedBodyParams winged_params_from_table(const ParameterTable& table);

/// Surface of revolution around the x axis through explicit stations
/// (x, radius). End stations with radius 0 become apex vertices. Shared by
/// the hull and the winged-body fuselage.
TriMesh revolve_stations(const std::vector<double>& station_x,
                         const std::vector<double>& station_r,
                         int angular_segments);

} // namespace anvil
