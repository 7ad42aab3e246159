#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anvil/geometry.hpp"

namespace anvil {

enum class StlFormat { Binary, Ascii };

struct StlDiagnostics {
    StlFormat format = StlFormat::Binary;
    std::size_t triangle_count = 0;
    bool watertight = false;
    Box bounding_box_mm{{0, 0, 0}, {0, 0, 0}};
    std::size_t welded_vertices = 0; // vertices merged by the tolerance weld
};

/// Serialize a mesh. Binary layout is the de facto standard: 80-byte header,
/// uint32 facet count (little endian), then 50 bytes per facet. Lengths are
/// millimeters. ASCII output prints 9 significant digits, enough to
/// round-trip the 32-bit facet floats.
std::vector<std::uint8_t> write_stl(const TriMesh& mesh, StlFormat format,
                                    const std::string& name = "anvil");

void write_stl_file(const TriMesh& mesh, const std::string& path, StlFormat format,
                    const std::string& name = "anvil");

/// Parse binary or ASCII STL. Detection: the binary size check
/// (84 + 50 * count == file size) wins over a leading "solid", since real
/// binary files often start with that word. Coincident vertices are welded
/// within `weld_tolerance_mm`.
TriMesh read_stl(const std::vector<std::uint8_t>& bytes, StlDiagnostics* diagnostics = nullptr,
                 double weld_tolerance_mm = 1e-6);

TriMesh read_stl_file(const std::string& path, StlDiagnostics* diagnostics = nullptr,
                      double weld_tolerance_mm = 1e-6);

} // namespace anvil
