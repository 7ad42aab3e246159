#include "anvil/external_case.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "anvil/vtk.hpp"

namespace anvil {

using nlohmann::json;

ExternalCase emit_external_case(const HexMesh& mesh, const FlowConditions& cond,
                                const TurbulenceIc& ic, const std::filesystem::path& dir,
                                const ExternalCommand& command) {
    return emit_external_case(boundary_faces(mesh), mesh, cond, ic, dir, command);
}

ExternalCase emit_external_case(const std::vector<MeshFace>& faces, const HexMesh& mesh,
                                const FlowConditions& cond, const TurbulenceIc& ic,
                                const std::filesystem::path& dir,
                                const ExternalCommand& command) {
    std::set<Patch> present;
    for (const MeshFace& f : faces) present.insert(f.patch);
    for (Patch p : {Patch::Inlet, Patch::Outlet, Patch::Symmetry, Patch::Body}) {
        if (!present.count(p)) {
            throw Error(Err::MissingPatch, std::string("mesh has no ") + to_string(p) +
                                               " patch faces");
        }
    }

    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error(Err::IoFailure, "cannot create case directory: " + dir.string());
    }

    ExternalCase c;
    c.dir = dir;
    c.command = command;
    c.result_file = dir / "forces.csv";
    c.patches = {
        {Patch::Inlet, "fixedVelocity", {cond.inlet_speed_m_s, 0.0, 0.0}, 0.0},
        {Patch::Outlet, "fixedPressure", {0, 0, 0}, 0.0},
        {Patch::Body, "noSlip", {0, 0, 0}, 0.0},
        {Patch::Symmetry, "symmetry", {0, 0, 0}, 0.0},
    };

    write_hex_mesh_vtk(mesh, (dir / "mesh.vtk").string());
    write_boundary_faces_vtk(faces, (dir / "patches.vtk").string());

    json boundary = json::array();
    for (const PatchBcRecord& p : c.patches) {
        json rec = {{"patch", to_string(p.patch)}, {"type", p.type}};
        if (p.type == "fixedVelocity") {
            rec["velocity_m_s"] = {p.velocity_m_s.x, p.velocity_m_s.y, p.velocity_m_s.z};
        } else if (p.type == "fixedPressure") {
            rec["pressure_pa"] = p.pressure_pa;
        }
        boundary.push_back(rec);
    }
    std::ofstream(dir / "boundary.json") << json{{"patches", boundary}}.dump(2) << "\n";

    // Frontal area in voxel terms when the mesh carries occupancy data.
    if (!mesh.base_inside.empty() &&
        mesh.base_inside.size() == static_cast<std::size_t>(mesh.base.product())) {
        try {
            VoxelDomain vd = voxel_domain_from_hexmesh(mesh);
            c.reference_area_m2 = frontal_area_m2(vd);
            c.body_length_m = vd.body_length_m;
        } catch (const Error&) {
            // non-cubic cells: leave the area to the external tool
        }
    }

    json initial = {{"density_kg_m3", cond.density_kg_m3},
                    {"kinematic_viscosity_m2_s", cond.kinematic_viscosity_m2_s},
                    {"inlet_speed_m_s", cond.inlet_speed_m_s},
                    {"turbulence_intensity", cond.turbulence_intensity},
                    {"k_m2_s2", ic.k_m2_s2},
                    {"omega_1_s", ic.omega_1_s},
                    {"c_mu", ic.c_mu},
                    {"length_scale_m", ic.length_scale_m}};
    std::ofstream(dir / "initial.json") << initial.dump(2) << "\n";

    json casej = {{"command", command.argv},
                  {"timeout_s", command.timeout_s},
                  {"result_file", "forces.csv"},
                  {"result_contract", "CSV, header 'time,drag_N', last row wins"},
                  {"reference_area_m2", c.reference_area_m2},
                  {"body_length_m", c.body_length_m}};
    std::ofstream(dir / "case.json") << casej.dump(2) << "\n";
    return c;
}

namespace {

struct RunResult {
    int exit_code = -1;
    bool timed_out = false;
    std::string log;
};

RunResult run_command(const std::vector<std::string>& argv, const std::filesystem::path& cwd,
                      double timeout_s) {
    std::filesystem::path log_path = cwd / "run.log";
    pid_t pid = fork();
    if (pid < 0) {
        throw Error(Err::CommandFailed, "fork failed");
    }
    if (pid == 0) {
        int fd = open(log_path.c_str(), O_CREAT | O_WRONLY | O_TRUNC, 0644);
        if (chdir(cwd.c_str()) != 0) _exit(127);
        if (fd >= 0) {
            dup2(fd, 1);
            dup2(fd, 2);
            close(fd);
        }
        std::vector<char*> args;
        args.reserve(argv.size() + 1);
        for (const std::string& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        execvp(args[0], args.data());
        _exit(127);
    }

    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                        std::chrono::duration<double>(timeout_s));
    RunResult res;
    int status = 0;
    for (;;) {
        pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) break;
        if (r < 0) {
            throw Error(Err::CommandFailed, "waitpid failed");
        }
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            res.timed_out = true;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (WIFEXITED(status)) {
        res.exit_code = WEXITSTATUS(status);
    }
    std::ifstream log(log_path);
    if (log) {
        std::ostringstream buf;
        buf << log.rdbuf();
        res.log = buf.str();
        if (res.log.size() > 8192) res.log.resize(8192);
    }
    return res;
}

} // namespace

DragReport run_external(const ExternalCase& c, const FlowConditions& cond) {
    if (c.command.argv.empty()) {
        throw Error(Err::CommandFailed, "no external command configured");
    }
    RunResult res = run_command(c.command.argv, c.dir, c.command.timeout_s);
    if (res.timed_out) {
        throw Error(Err::Timeout, "external solver exceeded " +
                                      std::to_string(c.command.timeout_s) + " s");
    }
    if (res.exit_code != 0) {
        throw Error(Err::CommandFailed, "external solver exited with code " +
                                            std::to_string(res.exit_code) +
                                            "; captured output:\n" + res.log);
    }
    std::ifstream in(c.result_file);
    if (!in) {
        throw Error(Err::ResultMissing, "result file not found: " + c.result_file.string());
    }
    std::string line;
    if (!std::getline(in, line) || line.rfind("time,drag_N", 0) != 0) {
        throw Error(Err::ParseError, "forces.csv must start with header 'time,drag_N'");
    }
    bool have_row = false;
    double drag = 0.0;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string t, d;
        if (!std::getline(ls, t, ',') || !std::getline(ls, d)) {
            throw Error(Err::ParseError, "forces.csv line " + std::to_string(line_no));
        }
        try {
            drag = std::stod(d);
        } catch (const std::exception&) {
            throw Error(Err::ParseError, "forces.csv line " + std::to_string(line_no) +
                                             ": bad drag value '" + d + "'");
        }
        have_row = true;
    }
    if (!have_row) {
        throw Error(Err::ParseError, "forces.csv has no data rows");
    }
    DragReport rep;
    rep.drag_N = drag;
    rep.force_N = {drag, 0.0, 0.0};
    rep.reference_area_m2 = c.reference_area_m2;
    rep.reynolds = cond.reynolds(c.body_length_m);
    double q = 0.5 * cond.density_kg_m3 * cond.inlet_speed_m_s * cond.inlet_speed_m_s;
    rep.drag_coefficient =
        rep.reference_area_m2 > 0.0 ? rep.drag_N / (q * rep.reference_area_m2) : 0.0;
    return rep;
}

} // namespace anvil
