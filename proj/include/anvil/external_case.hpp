#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "anvil/flow.hpp"
#include "anvil/hex_mesh.hpp"

namespace anvil {

struct PatchBcRecord {
    Patch patch = Patch::Inlet;
    std::string type;   // fixedVelocity | fixedPressure | noSlip | symmetry
    Vec3 velocity_m_s;  // fixedVelocity only
    double pressure_pa = 0.0; // fixedPressure only
};

struct ExternalCommand {
    std::vector<std::string> argv;
    double timeout_s = 3600.0;
};

/// A self-contained case directory for an external RANS solver:
///   mesh.vtk       volume mesh (legacy VTK, mm)
///   patches.vtk    boundary faces with patch ids
///   boundary.json  per-patch boundary-condition records
///   initial.json   fluid properties and the k/omega initial values
///   case.json      the configured command and the result-file contract
/// The solver must write forces.csv ("time,drag_N", last row wins).
struct ExternalCase {
    std::filesystem::path dir;
    std::vector<PatchBcRecord> patches;
    ExternalCommand command;
    std::filesystem::path result_file;
    double reference_area_m2 = 0.0;
    double body_length_m = 0.0;
};

ExternalCase emit_external_case(const HexMesh& mesh, const FlowConditions& cond,
                                const TurbulenceIc& ic, const std::filesystem::path& dir,
                                const ExternalCommand& command);

/// Variant taking an explicit face list (the patch-completeness check runs on
/// whatever is passed in).
ExternalCase emit_external_case(const std::vector<MeshFace>& faces, const HexMesh& mesh,
                                const FlowConditions& cond, const TurbulenceIc& ic,
                                const std::filesystem::path& dir,
                                const ExternalCommand& command);

/// Run the configured command inside the case directory and parse forces.csv.
DragReport run_external(const ExternalCase& c, const FlowConditions& cond);

} // namespace anvil
