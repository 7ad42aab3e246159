#include "anvil/stl_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace anvil {

namespace {

void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    out.push_back(static_cast<std::uint8_t>(bits & 0xFF));
    out.push_back(static_cast<std::uint8_t>((bits >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((bits >> 16) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((bits >> 24) & 0xFF));
}

float get_f32(const std::uint8_t* p) {
    std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                         (static_cast<std::uint32_t>(p[1]) << 8) |
                         (static_cast<std::uint32_t>(p[2]) << 16) |
                         (static_cast<std::uint32_t>(p[3]) << 24);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<std::uint8_t> write_binary(const TriMesh& mesh, const std::string& name) {
    std::vector<std::uint8_t> out;
    out.reserve(84 + mesh.triangles.size() * 50);
    std::string header = name;
    header.resize(80, '\0');
    out.insert(out.end(), header.begin(), header.end());
    std::uint32_t n = static_cast<std::uint32_t>(mesh.triangles.size());
    out.push_back(static_cast<std::uint8_t>(n & 0xFF));
    out.push_back(static_cast<std::uint8_t>((n >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((n >> 16) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((n >> 24) & 0xFF));
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const Tri& tri = mesh.triangles[t];
        Vec3 nrm = t < mesh.normals.size()
                       ? mesh.normals[t]
                       : normalized(cross(mesh.vertices[tri.b] - mesh.vertices[tri.a],
                                          mesh.vertices[tri.c] - mesh.vertices[tri.a]));
        put_f32(out, static_cast<float>(nrm.x));
        put_f32(out, static_cast<float>(nrm.y));
        put_f32(out, static_cast<float>(nrm.z));
        for (std::uint32_t vi : {tri.a, tri.b, tri.c}) {
            const Vec3& v = mesh.vertices[vi];
            put_f32(out, static_cast<float>(v.x));
            put_f32(out, static_cast<float>(v.y));
            put_f32(out, static_cast<float>(v.z));
        }
        out.push_back(0);
        out.push_back(0); // attribute byte count
    }
    return out;
}

std::vector<std::uint8_t> write_ascii(const TriMesh& mesh, const std::string& name) {
    std::ostringstream os;
    os << "solid " << name << "\n";
    char buf[256];
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const Tri& tri = mesh.triangles[t];
        Vec3 nrm = t < mesh.normals.size()
                       ? mesh.normals[t]
                       : normalized(cross(mesh.vertices[tri.b] - mesh.vertices[tri.a],
                                          mesh.vertices[tri.c] - mesh.vertices[tri.a]));
        std::snprintf(buf, sizeof(buf), "  facet normal %.9g %.9g %.9g\n", nrm.x, nrm.y, nrm.z);
        os << buf << "    outer loop\n";
        for (std::uint32_t vi : {tri.a, tri.b, tri.c}) {
            const Vec3& v = mesh.vertices[vi];
            std::snprintf(buf, sizeof(buf), "      vertex %.9g %.9g %.9g\n", v.x, v.y, v.z);
            os << buf;
        }
        os << "    endloop\n  endfacet\n";
    }
    os << "endsolid " << name << "\n";
    std::string s = os.str();
    return std::vector<std::uint8_t>(s.begin(), s.end());
}

TriMesh finalize(TriMesh soup, StlDiagnostics* diag, double tol, StlFormat format) {
    std::size_t before = soup.vertices.size();
    TriMesh mesh = weld_vertices(soup, tol);
    if (diag) {
        diag->format = format;
        diag->triangle_count = mesh.triangles.size();
        diag->watertight = check_watertight(mesh).watertight;
        diag->bounding_box_mm = bounding_box(mesh);
        diag->welded_vertices = before - mesh.vertices.size();
    }
    return mesh;
}

TriMesh read_binary(const std::vector<std::uint8_t>& bytes, StlDiagnostics* diag, double tol) {
    if (bytes.size() < 84) {
        throw Error(Err::TruncatedFile, "binary STL shorter than its 84-byte preamble");
    }
    std::uint32_t count = get_u32(bytes.data() + 80);
    std::size_t expected = 84 + static_cast<std::size_t>(count) * 50;
    if (bytes.size() < expected) {
        std::ostringstream os;
        os << "facet count field says " << count << " facets ("
           << expected << " bytes) but file has " << bytes.size();
        throw Error(Err::FacetCountMismatch, os.str());
    }
    TriMesh soup;
    soup.vertices.reserve(count * 3);
    soup.triangles.reserve(count);
    const std::uint8_t* p = bytes.data() + 84;
    for (std::uint32_t t = 0; t < count; ++t, p += 50) {
        for (int v = 0; v < 3; ++v) {
            const std::uint8_t* q = p + 12 + v * 12;
            Vec3 vert{get_f32(q), get_f32(q + 4), get_f32(q + 8)};
            if (!std::isfinite(vert.x) || !std::isfinite(vert.y) || !std::isfinite(vert.z)) {
                throw Error(Err::ParseError, "non-finite vertex in binary STL");
            }
            soup.vertices.push_back(vert);
        }
        std::uint32_t base = t * 3;
        soup.triangles.push_back({base, base + 1, base + 2});
    }
    return finalize(std::move(soup), diag, tol, StlFormat::Binary);
}

TriMesh read_ascii(const std::vector<std::uint8_t>& bytes, StlDiagnostics* diag, double tol) {
    std::string text(bytes.begin(), bytes.end());
    std::istringstream in(text);
    std::string line;
    TriMesh soup;
    std::vector<Vec3> pending;
    long line_no = 0;
    bool saw_solid = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok)) continue;
        if (tok == "solid") {
            saw_solid = true;
        } else if (tok == "facet" || tok == "outer" || tok == "endloop" ||
                   tok == "endfacet" || tok == "endsolid") {
            if (tok == "endfacet") {
                if (pending.size() != 3) {
                    throw Error(Err::UnparsableAscii,
                                "line " + std::to_string(line_no) +
                                    ": facet closed with " + std::to_string(pending.size()) +
                                    " vertices");
                }
                std::uint32_t base = static_cast<std::uint32_t>(soup.vertices.size());
                soup.vertices.insert(soup.vertices.end(), pending.begin(), pending.end());
                soup.triangles.push_back({base, base + 1, base + 2});
                pending.clear();
            }
        } else if (tok == "vertex") {
            Vec3 v;
            if (!(ls >> v.x >> v.y >> v.z)) {
                throw Error(Err::UnparsableAscii,
                            "line " + std::to_string(line_no) + ": bad vertex");
            }
            pending.push_back(v);
            if (pending.size() > 3) {
                throw Error(Err::UnparsableAscii,
                            "line " + std::to_string(line_no) + ": more than 3 vertices in loop");
            }
        } else {
            throw Error(Err::UnparsableAscii,
                        "line " + std::to_string(line_no) + ": unexpected token '" + tok + "'");
        }
    }
    if (!saw_solid) {
        throw Error(Err::UnparsableAscii, "no 'solid' keyword found");
    }
    return finalize(std::move(soup), diag, tol, StlFormat::Ascii);
}

} // namespace

std::vector<std::uint8_t> write_stl(const TriMesh& mesh, StlFormat format,
                                    const std::string& name) {
    return format == StlFormat::Binary ? write_binary(mesh, name) : write_ascii(mesh, name);
}

void write_stl_file(const TriMesh& mesh, const std::string& path, StlFormat format,
                    const std::string& name) {
    auto bytes = write_stl(mesh, format, name);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(Err::IoFailure, "cannot open for writing: " + path);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

TriMesh read_stl(const std::vector<std::uint8_t>& bytes, StlDiagnostics* diagnostics,
                 double weld_tolerance_mm) {
    if (bytes.size() < 15) { // smallest syntactically valid ASCII: "solid\nendsolid"
        throw Error(Err::TruncatedFile, "file too small to be an STL");
    }
    // Size-consistency check first: binary files may legitimately begin with
    // the bytes "solid".
    if (bytes.size() >= 84) {
        std::uint32_t count = get_u32(bytes.data() + 80);
        if (bytes.size() == 84 + static_cast<std::size_t>(count) * 50) {
            return read_binary(bytes, diagnostics, weld_tolerance_mm);
        }
    }
    std::string head(bytes.begin(), bytes.begin() + std::min<std::size_t>(bytes.size(), 6));
    if (head.rfind("solid", 0) == 0) {
        return read_ascii(bytes, diagnostics, weld_tolerance_mm);
    }
    return read_binary(bytes, diagnostics, weld_tolerance_mm);
}

TriMesh read_stl_file(const std::string& path, StlDiagnostics* diagnostics,
                      double weld_tolerance_mm) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Err::IoFailure, "cannot open STL file: " + path);
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return read_stl(bytes, diagnostics, weld_tolerance_mm);
}

} // namespace anvil
