#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "anvil/bo.hpp"
#include "anvil/config.hpp"
#include "anvil/flow.hpp"
#include "anvil/geometry.hpp"
#include "anvil/hex_mesh.hpp"

namespace anvil {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunContext {
    RunConfig config;
    std::string config_text; // raw bytes, hashed into the manifest
    std::filesystem::path out_dir;
    int workers = 1;
};

/// Exit codes shared by the CLI and the mode runners.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;    // config/IO errors
inline constexpr int kExitExhausted = 2; // AllEvaluationsFailed / AutoMeshExhausted

/// Geometry + meshing + solve pipeline for one design.
class DesignEvaluator {
public:
    DesignEvaluator(const RunContext& ctx);

    /// Physical parameter values, ordered as the design space declares them.
    TriMesh instantiate(const std::vector<double>& params_mm) const;

    struct Result {
        DragReport report;
        int mesh_attempts = 0;
        double wall_s = 0.0;
    };

    /// Full evaluation; `tag` names the case directory for external runs.
    Result evaluate(const std::vector<double>& params_mm, const std::string& tag) const;

    /// Mesh + solve a prebuilt surface (CFD mode external-STL path). The
    /// field output is written to `field_path` when the internal backend ran.
    Result evaluate_mesh(const TriMesh& body, const std::string& tag,
                         const std::optional<std::string>& field_path) const;

    const ParameterTable& seed_table() const { return table_; }

private:
    const RunContext& ctx_;
    ParameterTable table_;
};

int run_data_generation(const RunContext& ctx);
int run_cfd(const RunContext& ctx, const std::optional<std::string>& stl_override,
            const std::map<std::string, double>& param_overrides);
int run_optimize(const RunContext& ctx);

/// Helpers shared with tests.
std::filesystem::path dataset_path(const RunContext& ctx);
std::filesystem::path manifest_path(const RunContext& ctx);

} // namespace anvil
