#pragma once

#include <optional>
#include <string>
#include <vector>

#include "anvil/common.hpp"

namespace anvil {

class ParameterTable; // geometry.hpp

enum class RunMode { DataGeneration, Cfd, Optimize };
enum class SeedDesign { RevolvedHull, WingedBody, ExternalStl };
enum class SolverBackend { Internal, ExternalCommand };
enum class SamplingMethod { UniformRandom, LhsMaximin, LhsMinCorr };
enum class AcquisitionKind { Lcb };

const char* to_string(RunMode m);
const char* to_string(SeedDesign s);
const char* to_string(SamplingMethod m);

/// Fluid properties in SI units. The Mach guard rejects inputs outside the
/// incompressible envelope before any meshing or solving happens.
struct FluidSpec {
    double inlet_speed_m_s = 0.0;
    double density_kg_m3 = 0.0;
    double dynamic_viscosity = 0.0;   // N s / m^2
    double turbulence_intensity = 0.0; // fraction in (0,1)
    double speed_of_sound_m_s = 340.0;

    double kinematic_viscosity() const { return dynamic_viscosity / density_kg_m3; }
};

struct DesignParameter {
    std::string name;
    double min_mm = 0.0;
    double max_mm = 0.0;
};

struct DesignSpaceSpec {
    std::vector<DesignParameter> parameters;
    SeedDesign seed_design = SeedDesign::RevolvedHull;
    std::string stl_path; // required iff seed_design == ExternalStl

    int dimension() const { return static_cast<int>(parameters.size()); }
};

struct BoSpec {
    int budget = 0;
    int initial_samples = 0;
    double kappa = 2.0;
    double noise_variance = 1e-6;
    AcquisitionKind acquisition = AcquisitionKind::Lcb;
};

struct SamplingSpec {
    SamplingMethod method = SamplingMethod::UniformRandom;
    int count = 0;
    int batch_size = 0;
};

struct DomainScale {
    double upstream = 1.0;   // multiples of body bbox length added before the body
    double downstream = 2.0; // multiples added behind
    double lateral = 1.0;    // multiples added on each lateral side
};

struct MeshSpec {
    DomainScale domain_scale;
    Int3 base_cells{16, 16, 16};
    int surface_refinement_levels = 1;
    int max_retries = 3;
};

/// Optional tuning accepted inside the "solver_backend" object form; the
/// plain string forms use these defaults.
struct SolverOptions {
    double residual_tol = 1e-5;
    long max_steps = 200000;
    std::vector<std::string> command; // external backend argv
    double timeout_s = 3600.0;
};

struct RunConfig {
    RunMode mode = RunMode::Cfd;
    FluidSpec fluid;
    MeshSpec mesh;
    DesignSpaceSpec design;
    std::optional<BoSpec> optimizer; // present iff mode == Optimize
    std::optional<SamplingSpec> sampling; // present iff mode == DataGeneration
    SolverBackend solver_backend = SolverBackend::Internal;
    SolverOptions solver_options;
    std::string output_dir;
    std::uint64_t rng_seed = 0;
};

/// Parse and validate a configuration document. Unknown keys are rejected
/// with their JSON path; every bound violation names the offending field.
RunConfig parse_config(const std::string& json_text);

/// Inverse of parse_config for valid configs (round-trip identity).
std::string serialize_config(const RunConfig& config);

/// Check the declared design space against a seed design's parameter table:
/// every name must exist and every range must lie within the table's bounds.
void validate_against_seed(const RunConfig& config, const ParameterTable& table);

} // namespace anvil
