#pragma once

#include <string>
#include <vector>

#include "anvil/hex_mesh.hpp"

namespace anvil {

/// Legacy ASCII unstructured grid of the fluid cells (VTK_HEXAHEDRON), with
/// refinement level and surface flag as cell data.
void write_hex_mesh_vtk(const HexMesh& mesh, const std::string& path);

/// Boundary faces as quads (VTK_QUAD) with the patch id as cell data
/// (0 inlet, 1 outlet, 2 symmetry, 3 body).
void write_boundary_faces_vtk(const std::vector<MeshFace>& faces, const std::string& path);

} // namespace anvil
