#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "anvil/config.hpp"
#include "anvil/hex_mesh.hpp"

namespace anvil {

// ---------------------------------------------------------------------------
// Conditions and turbulence initial values
// ---------------------------------------------------------------------------

struct FlowConditions {
    double inlet_speed_m_s = 1.0;
    double density_kg_m3 = 1.225;
    double kinematic_viscosity_m2_s = 1.5e-5;
    double turbulence_intensity = 0.01;

    static FlowConditions from_fluid(const FluidSpec& f) {
        return {f.inlet_speed_m_s, f.density_kg_m3, f.kinematic_viscosity(),
                f.turbulence_intensity};
    }
    double reynolds(double body_length_m) const {
        return inlet_speed_m_s * body_length_m / kinematic_viscosity_m2_s;
    }
};

struct TurbulenceIc {
    double k_m2_s2 = 0.0;     // turbulent kinetic energy
    double omega_1_s = 0.0;   // specific dissipation rate
    double c_mu = 0.09;
    double length_scale_m = 0.0;
};

/// k = 3/2 (U I)^2, omega = sqrt(k) / (c_mu^(1/4) L); the standard
/// turbulence-intensity initialization used to seed external RANS cases.
TurbulenceIc compute_turbulence_ic(const FlowConditions& cond, double length_scale_m,
                                   double c_mu = 0.09);

// ---------------------------------------------------------------------------
// Internal lattice-Boltzmann solver (D3Q19 BGK), the desk-scale verification
// engine. It consumes the uniform base-level voxelization of the hex mesh.
// ---------------------------------------------------------------------------

enum class FaceBc : std::uint8_t { Inlet, Outlet, Symmetry, Wall, Periodic };

struct VoxelDomain {
    Int3 n;
    double dx_m = 0.0; // cubic cell size
    Vec3 origin_m;
    std::vector<std::uint8_t> solid; // n.x*n.y*n.z, 1 = body
    std::array<FaceBc, 6> bc{FaceBc::Inlet,    FaceBc::Outlet,   FaceBc::Symmetry,
                             FaceBc::Symmetry, FaceBc::Symmetry, FaceBc::Symmetry};
    Vec3 body_accel_m_s2; // kinematic body force (channel verification mode)
    double body_length_m = 0.0; // streamwise body extent, for Re reporting

    std::size_t count() const { return static_cast<std::size_t>(n.product()); }
    std::size_t idx(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * n.y + y) * n.x + x;
    }
    bool is_solid(int x, int y, int z) const { return solid[idx(x, y, z)] != 0; }
};

/// Base-level occupancy of a castellated mesh as the solver's voxel grid.
/// Requires cubic base cells (make_domain + cubic_base_counts guarantee it).
VoxelDomain voxel_domain_from_hexmesh(const HexMesh& mesh);

struct LbmOptions {
    long max_steps = 200000;
    double residual_tol = 1e-5; // relative drag change over one window
    int window = 100;
    double target_lattice_u = 0.05;
    double max_lattice_u = 0.1;
    double tau_min = 0.51;
    double tau_max = 1.9;
    int workers = 0; // 0: hardware concurrency; results identical regardless
};

struct LbmState; // distributions + unit conversions, needed for drag evaluation

struct FlowField {
    Int3 n;
    double dx_m = 0.0;
    Vec3 origin_m;
    std::vector<Vec3> velocity_m_s;  // per cell, zero in solid cells
    std::vector<double> pressure_pa; // gauge
    std::vector<double> residual_history;
    long steps = 0;
    bool converged = false;
    double mass_defect_rel = 0.0; // |dM per step| / inlet mass influx per step
    double tau = 0.0;
    double lattice_u = 0.0;
    double dt_s = 0.0;
    std::shared_ptr<const LbmState> state;
};

/// Steady incompressible flow on the voxel grid. Boundary conditions: fixed
/// velocity on Inlet faces, fixed density on Outlet, specular reflection on
/// Symmetry, half-way bounce-back on Wall faces and on body voxels.
/// Convergence: relative drag change over `window` steps below residual_tol;
/// domains without body voxels use the velocity change instead (there is no
/// drag signal to watch).
FlowField lbm_solve(const VoxelDomain& domain, const FlowConditions& cond,
                    const LbmOptions& opts = {});

/// A field at uniform equilibrium (no solving); `velocity` may be zero for a
/// resting fluid. Used for initial-state inspection and force-formula checks.
FlowField make_equilibrium_field(const VoxelDomain& domain, const FlowConditions& cond,
                                 const Vec3& velocity_m_s, const LbmOptions& opts = {});

struct DragReport {
    double drag_N = 0.0; // flow-axis (+x) component of the body force
    Vec3 force_N;
    double reference_area_m2 = 0.0; // frontal projected area
    double drag_coefficient = 0.0;  // 2 F / (rho U^2 A)
    long iterations = 0;
    double reynolds = 0.0;
    int mesh_attempts = 0; // filled by callers that auto-meshed
};

/// Momentum-exchange drag over the body-adjacent links of a (converged)
/// field, plus the frontal-area-based coefficient.
DragReport drag_from_field(const FlowField& field, const FlowConditions& cond);

/// Raw momentum-exchange force in Newtons (exposed for verification tests).
Vec3 momentum_exchange_force_N(const FlowField& field);

/// Legacy VTK structured points with point data "U" (m/s) and "p" (Pa).
void export_field(const FlowField& field, const std::string& path);

/// Reader for the exporter's output (round-trip checks, post-processing).
FlowField import_field(const std::string& path);

/// Frontal projected area of the solid voxels onto the flow-normal plane.
double frontal_area_m2(const VoxelDomain& domain);

} // namespace anvil
