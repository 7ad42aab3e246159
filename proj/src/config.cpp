#include "anvil/config.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "anvil/geometry.hpp"

namespace anvil {

using nlohmann::json;

const char* err_name(Err code) {
    switch (code) {
        case Err::MalformedJson: return "MalformedJson";
        case Err::UnknownKey: return "UnknownKey";
        case Err::MissingSection: return "MissingSection";
        case Err::RangeViolation: return "RangeViolation";
        case Err::DimensionLimitExceeded: return "DimensionLimitExceeded";
        case Err::UnknownParameter: return "UnknownParameter";
        case Err::BoundsMismatch: return "BoundsMismatch";
        case Err::OutOfBounds: return "OutOfBounds";
        case Err::DegenerateProfile: return "DegenerateProfile";
        case Err::ResolutionTooLow: return "ResolutionTooLow";
        case Err::SelfIntersection: return "SelfIntersection";
        case Err::NonPositiveParam: return "NonPositiveParam";
        case Err::TruncatedFile: return "TruncatedFile";
        case Err::FacetCountMismatch: return "FacetCountMismatch";
        case Err::UnparsableAscii: return "UnparsableAscii";
        case Err::NonWatertightInput: return "NonWatertightInput";
        case Err::AutoMeshExhausted: return "AutoMeshExhausted";
        case Err::Diverged: return "Diverged";
        case Err::NotConverged: return "NotConverged";
        case Err::Unstable: return "Unstable";
        case Err::MissingPatch: return "MissingPatch";
        case Err::CommandFailed: return "CommandFailed";
        case Err::ResultMissing: return "ResultMissing";
        case Err::ParseError: return "ParseError";
        case Err::Timeout: return "Timeout";
        case Err::SingularKernel: return "SingularKernel";
        case Err::NonFiniteObjective: return "NonFiniteObjective";
        case Err::AllEvaluationsFailed: return "AllEvaluationsFailed";
        case Err::DimensionMismatch: return "DimensionMismatch";
        case Err::IoFailure: return "IoFailure";
    }
    return "UnknownError";
}

const char* to_string(RunMode m) {
    switch (m) {
        case RunMode::DataGeneration: return "data_generation";
        case RunMode::Cfd: return "cfd";
        case RunMode::Optimize: return "optimize";
    }
    return "?";
}

const char* to_string(SeedDesign s) {
    switch (s) {
        case SeedDesign::RevolvedHull: return "revolved_hull";
        case SeedDesign::WingedBody: return "winged_body";
        case SeedDesign::ExternalStl: return "external_stl";
    }
    return "?";
}

const char* to_string(SamplingMethod m) {
    switch (m) {
        case SamplingMethod::UniformRandom: return "uniform_random";
        case SamplingMethod::LhsMaximin: return "lhs_maximin";
        case SamplingMethod::LhsMinCorr: return "lhs_mincorr";
    }
    return "?";
}

namespace {

[[noreturn]] void fail_range(const std::string& path, double value, const std::string& bound) {
    std::ostringstream os;
    os << path << " = " << value << " violates " << bound;
    throw Error(Err::RangeViolation, os.str());
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw Error(Err::UnknownKey, path + "." + it.key());
        }
    }
}

const json& require(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw Error(Err::MissingSection, path + "." + key);
    }
    return *it;
}

double require_number(const json& obj, const char* key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_number()) {
        throw Error(Err::MalformedJson, path + "." + key + " must be a number");
    }
    return v.get<double>();
}

double positive_number(const json& obj, const char* key, const std::string& path) {
    double v = require_number(obj, key, path);
    if (!(v > 0.0) || !std::isfinite(v)) {
        fail_range(path + "." + key, v, "> 0");
    }
    return v;
}

int positive_int(const json& obj, const char* key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_number_integer()) {
        throw Error(Err::MalformedJson, path + "." + key + " must be an integer");
    }
    auto n = v.get<long long>();
    if (n <= 0) {
        fail_range(path + "." + key, static_cast<double>(n), ">= 1");
    }
    return static_cast<int>(n);
}

std::string require_string(const json& obj, const char* key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_string()) {
        throw Error(Err::MalformedJson, path + "." + key + " must be a string");
    }
    return v.get<std::string>();
}

FluidSpec parse_fluid(const json& j) {
    reject_unknown_keys(j, {"inlet_speed_m_s", "density_kg_m3", "dynamic_viscosity",
                            "turbulence_intensity", "speed_of_sound_m_s"},
                        "fluid");
    FluidSpec f;
    f.inlet_speed_m_s = positive_number(j, "inlet_speed_m_s", "fluid");
    f.density_kg_m3 = positive_number(j, "density_kg_m3", "fluid");
    f.dynamic_viscosity = positive_number(j, "dynamic_viscosity", "fluid");
    f.turbulence_intensity = require_number(j, "turbulence_intensity", "fluid");
    if (!(f.turbulence_intensity > 0.0) || !(f.turbulence_intensity < 1.0)) {
        fail_range("fluid.turbulence_intensity", f.turbulence_intensity, "(0, 1)");
    }
    if (j.contains("speed_of_sound_m_s")) {
        f.speed_of_sound_m_s = positive_number(j, "speed_of_sound_m_s", "fluid");
    }
    double nu = f.kinematic_viscosity();
    if (!std::isfinite(nu) || !(nu > 0.0)) {
        fail_range("fluid.dynamic_viscosity/density", nu, "finite and > 0");
    }
    if (f.inlet_speed_m_s >= f.speed_of_sound_m_s) {
        fail_range("fluid.inlet_speed_m_s", f.inlet_speed_m_s,
                   "subsonic limit (< speed_of_sound_m_s = " +
                       std::to_string(f.speed_of_sound_m_s) + ")");
    }
    return f;
}

constexpr int kMaxDimensions = 20;

DesignSpaceSpec parse_design(const json& j) {
    reject_unknown_keys(j, {"parameters", "seed_design", "stl_path"}, "design");
    DesignSpaceSpec d;

    std::string seed = require_string(j, "seed_design", "design");
    if (seed == "revolved_hull") d.seed_design = SeedDesign::RevolvedHull;
    else if (seed == "winged_body") d.seed_design = SeedDesign::WingedBody;
    else if (seed == "external_stl") d.seed_design = SeedDesign::ExternalStl;
    else throw Error(Err::MalformedJson, "design.seed_design: unknown value '" + seed + "'");

    const json& params = require(j, "parameters", "design");
    if (!params.is_array() || params.empty()) {
        throw Error(Err::MalformedJson, "design.parameters must be a non-empty array");
    }
    if (params.size() > kMaxDimensions) {
        throw Error(Err::DimensionLimitExceeded,
                    "design.parameters has " + std::to_string(params.size()) +
                        " entries; the optimizer supports at most 20 dimensions");
    }
    std::set<std::string> names;
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::string path = "design.parameters[" + std::to_string(i) + "]";
        const json& p = params[i];
        reject_unknown_keys(p, {"name", "min", "max"}, path);
        DesignParameter dp;
        dp.name = require_string(p, "name", path);
        dp.min_mm = require_number(p, "min", path);
        dp.max_mm = require_number(p, "max", path);
        if (!(dp.min_mm < dp.max_mm)) {
            fail_range(path + ".min", dp.min_mm, "min < max");
        }
        if (!names.insert(dp.name).second) {
            throw Error(Err::MalformedJson, path + ".name duplicates '" + dp.name + "'");
        }
        d.parameters.push_back(dp);
    }

    if (d.seed_design == SeedDesign::ExternalStl) {
        d.stl_path = require_string(j, "stl_path", "design");
    } else if (j.contains("stl_path")) {
        throw Error(Err::UnknownKey, "design.stl_path (only valid for external_stl seeds)");
    }
    return d;
}

MeshSpec parse_mesh(const json& j) {
    reject_unknown_keys(j, {"domain_scale", "base_cells", "surface_refinement_levels",
                            "max_retries"},
                        "mesh");
    MeshSpec m;
    const json& ds = require(j, "domain_scale", "mesh");
    reject_unknown_keys(ds, {"upstream", "downstream", "lateral"}, "mesh.domain_scale");
    m.domain_scale.upstream = positive_number(ds, "upstream", "mesh.domain_scale");
    m.domain_scale.downstream = positive_number(ds, "downstream", "mesh.domain_scale");
    m.domain_scale.lateral = positive_number(ds, "lateral", "mesh.domain_scale");

    const json& bc = require(j, "base_cells", "mesh");
    if (!bc.is_array() || bc.size() != 3) {
        throw Error(Err::MalformedJson, "mesh.base_cells must be [nx, ny, nz]");
    }
    for (int a = 0; a < 3; ++a) {
        if (!bc[a].is_number_integer() || bc[a].get<long long>() <= 0) {
            fail_range("mesh.base_cells[" + std::to_string(a) + "]",
                       bc[a].is_number() ? bc[a].get<double>() : 0.0, ">= 1");
        }
        m.base_cells[a] = bc[a].get<int>();
    }

    const json& lv = require(j, "surface_refinement_levels", "mesh");
    if (!lv.is_number_integer() || lv.get<long long>() < 0) {
        fail_range("mesh.surface_refinement_levels",
                   lv.is_number() ? lv.get<double>() : -1.0, ">= 0");
    }
    m.surface_refinement_levels = lv.get<int>();
    m.max_retries = positive_int(j, "max_retries", "mesh");
    return m;
}

BoSpec parse_optimizer(const json& j) {
    reject_unknown_keys(j, {"budget", "initial_samples", "kappa", "noise_variance",
                            "acquisition"},
                        "optimizer");
    BoSpec b;
    b.budget = positive_int(j, "budget", "optimizer");
    b.initial_samples = positive_int(j, "initial_samples", "optimizer");
    if (!(b.initial_samples < b.budget)) {
        fail_range("optimizer.initial_samples", b.initial_samples, "< budget");
    }
    b.kappa = require_number(j, "kappa", "optimizer");
    if (b.kappa < 0.0 || !std::isfinite(b.kappa)) {
        fail_range("optimizer.kappa", b.kappa, ">= 0");
    }
    b.noise_variance = require_number(j, "noise_variance", "optimizer");
    if (b.noise_variance < 0.0) {
        fail_range("optimizer.noise_variance", b.noise_variance, ">= 0");
    }
    std::string acq = require_string(j, "acquisition", "optimizer");
    if (acq != "lcb") {
        throw Error(Err::MalformedJson, "optimizer.acquisition: only 'lcb' is supported");
    }
    b.acquisition = AcquisitionKind::Lcb;
    return b;
}

SamplingSpec parse_sampling(const json& j) {
    reject_unknown_keys(j, {"method", "count", "batch_size"}, "sampling");
    SamplingSpec s;
    std::string m = require_string(j, "method", "sampling");
    if (m == "uniform_random") s.method = SamplingMethod::UniformRandom;
    else if (m == "lhs_maximin") s.method = SamplingMethod::LhsMaximin;
    else if (m == "lhs_mincorr") s.method = SamplingMethod::LhsMinCorr;
    else throw Error(Err::MalformedJson, "sampling.method: unknown value '" + m + "'");
    s.count = positive_int(j, "count", "sampling");
    s.batch_size = positive_int(j, "batch_size", "sampling");
    if (s.batch_size > s.count) {
        fail_range("sampling.batch_size", s.batch_size, "<= count");
    }
    return s;
}

void parse_solver_backend(const json& v, RunConfig& c) {
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (s == "internal") {
            c.solver_backend = SolverBackend::Internal;
            return;
        }
        throw Error(Err::MalformedJson,
                    "solver_backend: unknown value '" + s +
                        "' (use \"internal\" or an object with \"type\")");
    }
    if (!v.is_object()) {
        throw Error(Err::MalformedJson, "solver_backend must be a string or object");
    }
    reject_unknown_keys(v, {"type", "residual_tol", "max_steps", "command", "timeout_s"},
                        "solver_backend");
    std::string type = require_string(v, "type", "solver_backend");
    if (type == "internal") {
        c.solver_backend = SolverBackend::Internal;
    } else if (type == "external_command") {
        c.solver_backend = SolverBackend::ExternalCommand;
        const json& cmd = require(v, "command", "solver_backend");
        if (!cmd.is_array() || cmd.empty()) {
            throw Error(Err::MalformedJson, "solver_backend.command must be a non-empty argv array");
        }
        for (const auto& a : cmd) {
            if (!a.is_string()) {
                throw Error(Err::MalformedJson, "solver_backend.command entries must be strings");
            }
            c.solver_options.command.push_back(a.get<std::string>());
        }
    } else {
        throw Error(Err::MalformedJson, "solver_backend.type: unknown value '" + type + "'");
    }
    if (v.contains("residual_tol")) {
        c.solver_options.residual_tol = positive_number(v, "residual_tol", "solver_backend");
    }
    if (v.contains("max_steps")) {
        c.solver_options.max_steps = positive_int(v, "max_steps", "solver_backend");
    }
    if (v.contains("timeout_s")) {
        c.solver_options.timeout_s = positive_number(v, "timeout_s", "solver_backend");
    }
}

} // namespace

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(Err::MalformedJson, e.what());
    }
    if (!j.is_object()) {
        throw Error(Err::MalformedJson, "top level must be a JSON object");
    }
    reject_unknown_keys(j, {"mode", "fluid", "mesh", "design", "optimizer", "sampling",
                            "solver_backend", "output_dir", "rng_seed"},
                        "$");

    RunConfig c;
    std::string mode = require_string(j, "mode", "$");
    if (mode == "data_generation") c.mode = RunMode::DataGeneration;
    else if (mode == "cfd") c.mode = RunMode::Cfd;
    else if (mode == "optimize") c.mode = RunMode::Optimize;
    else throw Error(Err::MalformedJson, "mode: unknown value '" + mode + "'");

    c.fluid = parse_fluid(require(j, "fluid", "$"));
    c.mesh = parse_mesh(require(j, "mesh", "$"));
    c.design = parse_design(require(j, "design", "$"));

    // Mode-conditional sections must be present exactly when required.
    if (c.mode == RunMode::Optimize) {
        if (!j.contains("optimizer")) {
            throw Error(Err::MissingSection, "$.optimizer (required for mode=optimize)");
        }
        c.optimizer = parse_optimizer(j["optimizer"]);
    } else if (j.contains("optimizer")) {
        throw Error(Err::UnknownKey, "$.optimizer (only valid for mode=optimize)");
    }
    if (c.mode == RunMode::DataGeneration) {
        if (!j.contains("sampling")) {
            throw Error(Err::MissingSection, "$.sampling (required for mode=data_generation)");
        }
        c.sampling = parse_sampling(j["sampling"]);
    } else if (j.contains("sampling")) {
        throw Error(Err::UnknownKey, "$.sampling (only valid for mode=data_generation)");
    }

    if (c.design.seed_design == SeedDesign::ExternalStl && c.mode != RunMode::Cfd) {
        throw Error(Err::MalformedJson,
                    "design.seed_design=external_stl is only valid in cfd mode "
                    "(an external STL has no tunable parameters)");
    }

    parse_solver_backend(require(j, "solver_backend", "$"), c);

    c.output_dir = require_string(j, "output_dir", "$");
    if (c.output_dir.empty()) {
        throw Error(Err::RangeViolation, "output_dir must be a non-empty path");
    }

    const json& seed = require(j, "rng_seed", "$");
    if (!seed.is_number_unsigned()) {
        throw Error(Err::MalformedJson, "rng_seed must be an unsigned integer");
    }
    c.rng_seed = seed.get<std::uint64_t>();
    return c;
}

std::string serialize_config(const RunConfig& c) {
    json j;
    j["mode"] = to_string(c.mode);
    j["fluid"] = {{"inlet_speed_m_s", c.fluid.inlet_speed_m_s},
                  {"density_kg_m3", c.fluid.density_kg_m3},
                  {"dynamic_viscosity", c.fluid.dynamic_viscosity},
                  {"turbulence_intensity", c.fluid.turbulence_intensity},
                  {"speed_of_sound_m_s", c.fluid.speed_of_sound_m_s}};
    j["mesh"] = {{"domain_scale",
                  {{"upstream", c.mesh.domain_scale.upstream},
                   {"downstream", c.mesh.domain_scale.downstream},
                   {"lateral", c.mesh.domain_scale.lateral}}},
                 {"base_cells", {c.mesh.base_cells.x, c.mesh.base_cells.y, c.mesh.base_cells.z}},
                 {"surface_refinement_levels", c.mesh.surface_refinement_levels},
                 {"max_retries", c.mesh.max_retries}};
    json params = json::array();
    for (const auto& p : c.design.parameters) {
        params.push_back({{"name", p.name}, {"min", p.min_mm}, {"max", p.max_mm}});
    }
    j["design"] = {{"seed_design", to_string(c.design.seed_design)}, {"parameters", params}};
    if (c.design.seed_design == SeedDesign::ExternalStl) {
        j["design"]["stl_path"] = c.design.stl_path;
    }
    if (c.optimizer) {
        j["optimizer"] = {{"budget", c.optimizer->budget},
                          {"initial_samples", c.optimizer->initial_samples},
                          {"kappa", c.optimizer->kappa},
                          {"noise_variance", c.optimizer->noise_variance},
                          {"acquisition", "lcb"}};
    }
    if (c.sampling) {
        j["sampling"] = {{"method", to_string(c.sampling->method)},
                         {"count", c.sampling->count},
                         {"batch_size", c.sampling->batch_size}};
    }
    if (c.solver_backend == SolverBackend::Internal) {
        json sb = {{"type", "internal"},
                   {"residual_tol", c.solver_options.residual_tol},
                   {"max_steps", c.solver_options.max_steps}};
        j["solver_backend"] = sb;
    } else {
        j["solver_backend"] = {{"type", "external_command"},
                               {"command", c.solver_options.command},
                               {"timeout_s", c.solver_options.timeout_s},
                               {"residual_tol", c.solver_options.residual_tol},
                               {"max_steps", c.solver_options.max_steps}};
    }
    j["output_dir"] = c.output_dir;
    j["rng_seed"] = c.rng_seed;
    return j.dump(2);
}

void validate_against_seed(const RunConfig& config, const ParameterTable& table) {
    for (const auto& p : config.design.parameters) {
        if (!table.has(p.name)) {
            throw Error(Err::UnknownParameter,
                        "design parameter '" + p.name + "' not in the seed parameter table");
        }
        const ParameterEntry& e = table.at(p.name);
        if (p.min_mm < e.min_mm || p.max_mm > e.max_mm) {
            std::ostringstream os;
            os << "design parameter '" << p.name << "' range [" << p.min_mm << ", "
               << p.max_mm << "] exceeds table bounds [" << e.min_mm << ", " << e.max_mm
               << "]";
            throw Error(Err::BoundsMismatch, os.str());
        }
    }
}

} // namespace anvil
