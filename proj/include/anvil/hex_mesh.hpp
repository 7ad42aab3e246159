#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "anvil/config.hpp"
#include "anvil/geometry.hpp"

namespace anvil {

// ---------------------------------------------------------------------------
// Castellated hexahedral mesh. Cells live on an octree over a uniform base
// grid; a cell at refinement level l has integer coordinates on the
// (base << l) lattice. Only fluid cells are stored.
// ---------------------------------------------------------------------------

struct HexCell {
    int ix = 0, iy = 0, iz = 0;
    std::uint8_t level = 0;
    bool surface = false; // intersects the body surface (kept, stair-step boundary)
};

/// Integer cell accounting in finest-level micro volumes; the three buckets
/// plus nothing else partition the domain exactly.
struct CastellationStats {
    std::uint64_t fluid_units = 0;
    std::uint64_t surface_units = 0;
    std::uint64_t removed_units = 0;
    std::uint64_t total_units = 0;
    long removed_cells = 0; // cells discarded as inside the body (all levels)
};

struct HexMesh {
    Vec3 origin;      // mm, domain min corner
    Vec3 base_cell;   // mm per axis
    Int3 base;        // base cell counts
    int max_level = 0;
    std::vector<HexCell> cells;
    std::vector<std::uint8_t> base_inside; // base-grid occupancy: centroid inside body
    CastellationStats stats;

    Box domain() const {
        return {origin, origin + Vec3{base_cell.x * base.x, base_cell.y * base.y,
                                      base_cell.z * base.z}};
    }
    Vec3 cell_size(int level) const {
        double s = 1.0 / static_cast<double>(1 << level);
        return {base_cell.x * s, base_cell.y * s, base_cell.z * s};
    }
    Box cell_box(const HexCell& c) const {
        Vec3 s = cell_size(c.level);
        Vec3 lo = origin + Vec3{s.x * c.ix, s.y * c.iy, s.z * c.iz};
        return {lo, lo + s};
    }
    Vec3 cell_centroid(const HexCell& c) const {
        Box b = cell_box(c);
        return b.center();
    }
};

enum class Patch { Inlet, Outlet, Symmetry, Body };
const char* to_string(Patch p);

struct MeshFace {
    std::array<Vec3, 4> corners; // mm, consistent winding (outward for boundary)
    Patch patch = Patch::Body;
    std::uint32_t owner = 0; // owning fluid cell index
    int dir = 0;             // 0..5: -x,+x,-y,+y,-z,+z from the owner
};

/// Faces between a fluid cell and anything that is not fluid (domain boundary
/// or body). Partially covered faces at refinement interfaces are emitted as
/// quarter subfaces.
std::vector<MeshFace> boundary_faces(const HexMesh& mesh);

struct InternalFace {
    std::uint32_t a = 0, b = 0; // cell indices; `a` is the finer side
    int dir = 0;                // direction from a to b
};

std::vector<InternalFace> internal_faces(const HexMesh& mesh);

/// Unique face count (internal + boundary); 3 n^2 (n+1) for an n^3 block.
long total_face_count(const HexMesh& mesh);

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Uniform background grid filling `domain` with counts per axis; all cells
/// fluid at level 0.
HexMesh block_mesh(const Box& domain, Int3 counts);

enum class MeshStage { Castellation, Refinement, Quality };
const char* to_string(MeshStage s);

struct MeshFailure {
    MeshStage stage = MeshStage::Castellation;
    std::string code;
    long occupied_base_cells = 0;
    long detail_count = 0;

    std::string describe() const;
};

struct CastellateOptions {
    int workers = 0; // 0: hardware concurrency
};

/// Castellate the background grid against a watertight body: refine cells
/// crossing the surface to `levels`, drop cells whose centroid lies inside,
/// enforce 2:1 level balance and keep the single inlet-connected fluid
/// region. An empty body returns the background unchanged.
std::variant<HexMesh, MeshFailure> castellate(const HexMesh& background, const TriMesh& body,
                                              int levels, const CastellateOptions& opts = {});

// ---------------------------------------------------------------------------
// Quality
// ---------------------------------------------------------------------------

struct MeshQualityThresholds {
    double max_aspect = 100.0;
    double max_nonortho_deg = 65.0;
    double max_skewness = 4.0;
};

struct MeshQualityReport {
    double max_aspect = 0.0;
    double max_nonortho_deg = 0.0;
    double max_skewness = 0.0;
    long aspect_violations = 0;
    long nonortho_violations = 0;
    long skew_violations = 0;
    std::vector<std::uint32_t> flagged_cells; // violating cells, deduplicated

    long violations() const {
        return aspect_violations + nonortho_violations + skew_violations;
    }
};

MeshQualityReport quality_check(const HexMesh& mesh, const MeshQualityThresholds& thr = {});

/// Aspect-ratio portion of the quality check on explicit cell boxes (lets
/// tests inject a sliver among regular cells).
long aspect_violations(std::span<const Box> cell_boxes, double max_aspect,
                       double* max_seen = nullptr);

// ---------------------------------------------------------------------------
// Auto-meshing: retry castellation with doubled per-axis counts on failure.
// ---------------------------------------------------------------------------

struct MeshAttempt {
    Int3 base_cells;
    int levels = 0;
    bool success = false;
    std::optional<MeshFailure> failure;
};

struct AutoMeshResult {
    HexMesh mesh;
    std::vector<MeshAttempt> attempts;
};

class AutoMeshExhaustedError : public Error {
public:
    explicit AutoMeshExhaustedError(std::vector<MeshAttempt> attempts);
    const std::vector<MeshAttempt>& attempts() const { return attempts_; }

private:
    std::vector<MeshAttempt> attempts_;
};

/// Domain box from the body bounding box and the configured scales; the inlet
/// is the -x face.
Box make_domain(const Box& body_bbox, const DomainScale& scale);

/// Adjust `domain` (expanding the +x side and the lateral sides) so that the
/// returned counts tile it with cubic cells no larger than the requested
/// resolution allows. The internal flow solver needs cubic cells.
Int3 cubic_base_counts(Box& domain, Int3 requested);

AutoMeshResult auto_mesh(const TriMesh& body, const MeshSpec& spec,
                         const CastellateOptions& opts = {});

} // namespace anvil
