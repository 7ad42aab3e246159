#include "anvil/orchestrator.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "anvil/external_case.hpp"
#include "anvil/sampling.hpp"
#include "anvil/stl_io.hpp"

namespace anvil {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string iso_now() {
    auto t = std::chrono::system_clock::now();
    std::time_t tt = std::chrono::system_clock::to_time_t(t);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
    return buf;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string sanitize_csv(std::string s) {
    for (char& c : s) {
        if (c == ',' || c == '\n' || c == '"' || c == '\r') c = ';';
    }
    return s;
}

/// Per-run manifest, written exactly once as the last artifact.
class ManifestWriter {
public:
    ManifestWriter(const RunContext& ctx)
        : ctx_(ctx), start_(iso_now()), t0_(Clock::now()) {}

    void stage(const std::string& name, double seconds) { timings_[name] += seconds; }
    void count_failure(const std::string& kind) { failures_[kind] += 1; }

    void write(bool success, const std::string& error = "") {
        if (written_) return;
        written_ = true;
        json j;
        char hash[24];
        std::snprintf(hash, sizeof(hash), "%016llx",
                      static_cast<unsigned long long>(
                          fnv1a64(ctx_.config_text.data(), ctx_.config_text.size())));
        j["config_hash_fnv1a64"] = hash;
        j["tool_version"] = kToolVersion;
        j["mode"] = to_string(ctx_.config.mode);
        j["started_utc"] = start_;
        j["finished_utc"] = iso_now();
        j["wall_s"] = seconds_since(t0_);
        j["success"] = success;
        if (!error.empty()) j["error"] = error;
        j["stage_timings_s"] = timings_;
        j["failure_counts"] = failures_;
        std::ofstream out(ctx_.out_dir / "manifest.json");
        out << j.dump(2) << "\n";
    }

private:
    const RunContext& ctx_;
    std::string start_;
    Clock::time_point t0_;
    std::map<std::string, double> timings_;
    std::map<std::string, long> failures_;
    bool written_ = false;
};

void ensure_out_dir(const RunContext& ctx) {
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec || !fs::is_directory(ctx.out_dir)) {
        throw Error(Err::IoFailure, "cannot create output directory: " + ctx.out_dir.string());
    }
}

void log_stage(const std::string& what, double seconds) {
    std::fprintf(stderr, "[anvil] %-24s %8.2f s\n", what.c_str(), seconds);
}

} // namespace

std::filesystem::path dataset_path(const RunContext& ctx) {
    return ctx.out_dir / "dataset.csv";
}

std::filesystem::path manifest_path(const RunContext& ctx) {
    return ctx.out_dir / "manifest.json";
}

// ---------------------------------------------------------------------------
// DesignEvaluator
// ---------------------------------------------------------------------------

DesignEvaluator::DesignEvaluator(const RunContext& ctx) : ctx_(ctx) {
    switch (ctx.config.design.seed_design) {
        case SeedDesign::RevolvedHull:
            table_ = revolved_hull_table();
            break;
        case SeedDesign::WingedBody:
            table_ = winged_body_table();
            break;
        case SeedDesign::ExternalStl:
            table_ = ParameterTable(std::vector<ParameterEntry>{}); // pass-through
            return;
    }
    validate_against_seed(ctx.config, table_);
}

TriMesh DesignEvaluator::instantiate(const std::vector<double>& params_mm) const {
    const DesignSpaceSpec& space = ctx_.config.design;
    if (params_mm.size() != static_cast<std::size_t>(space.dimension())) {
        throw Error(Err::DimensionMismatch, "parameter count does not match design space");
    }
    std::map<std::string, double> assignment;
    for (std::size_t i = 0; i < params_mm.size(); ++i) {
        assignment[space.parameters[i].name] = params_mm[i];
    }
    ParameterTable t = apply_parameters(table_, assignment);
    switch (space.seed_design) {
        case SeedDesign::RevolvedHull:
            return instantiate_hull(hull_params_from_table(t), RevolveSegments{64, 128});
        case SeedDesign::WingedBody:
            return instantiate_winged(winged_params_from_table(t), 64);
        case SeedDesign::ExternalStl:
            throw Error(Err::MalformedJson, "external STL seeds have no parameters");
    }
    throw Error(Err::MalformedJson, "unknown seed design");
}

DesignEvaluator::Result DesignEvaluator::evaluate(const std::vector<double>& params_mm,
                                                  const std::string& tag) const {
    TriMesh body = instantiate(params_mm);
    return evaluate_mesh(body, tag, std::nullopt);
}

DesignEvaluator::Result DesignEvaluator::evaluate_mesh(
    const TriMesh& body, const std::string& tag,
    const std::optional<std::string>& field_path) const {
    Clock::time_point t0 = Clock::now();
    // When the orchestrator already runs a sample pool, keep each
    // castellation single-threaded instead of oversubscribing.
    CastellateOptions copts;
    copts.workers = ctx_.workers > 1 ? 1 : 0;
    AutoMeshResult meshed = auto_mesh(body, ctx_.config.mesh, copts);

    Result res;
    res.mesh_attempts = static_cast<int>(meshed.attempts.size());

    const FlowConditions cond = FlowConditions::from_fluid(ctx_.config.fluid);
    if (ctx_.config.solver_backend == SolverBackend::Internal) {
        VoxelDomain domain = voxel_domain_from_hexmesh(meshed.mesh);
        LbmOptions opts;
        opts.residual_tol = ctx_.config.solver_options.residual_tol;
        opts.max_steps = ctx_.config.solver_options.max_steps;
        opts.workers = ctx_.workers;
        FlowField field = lbm_solve(domain, cond, opts);
        res.report = drag_from_field(field, cond);
        if (field_path) {
            export_field(field, *field_path);
        }
    } else {
        Box bbox = bounding_box(body);
        double body_len_m = (bbox.hi.x - bbox.lo.x) / kMmPerM;
        TurbulenceIc ic = compute_turbulence_ic(cond, 0.07 * body_len_m);
        ExternalCommand cmd{ctx_.config.solver_options.command,
                            ctx_.config.solver_options.timeout_s};
        ExternalCase ec = emit_external_case(meshed.mesh, cond, ic,
                                             ctx_.out_dir / "cases" / tag, cmd);
        res.report = run_external(ec, cond);
    }
    res.report.mesh_attempts = res.mesh_attempts;
    res.wall_s = seconds_since(t0);
    return res;
}

// ---------------------------------------------------------------------------
// data generation
// ---------------------------------------------------------------------------

namespace {

struct SampleRow {
    long index = -1;
    std::vector<double> params_mm;
    std::string status = "ok"; // "ok" or an error summary
    int mesh_attempts = 0;
    std::optional<double> drag_N;
    double wall_s = 0.0;

    std::string to_csv() const {
        std::ostringstream os;
        os << index;
        for (double v : params_mm) os << "," << fmt17(v);
        os << "," << sanitize_csv(status) << "," << mesh_attempts << ","
           << (drag_N ? fmt17(*drag_N) : "") << "," << fmt17(wall_s);
        return os.str();
    }
};

std::string dataset_header(const DesignSpaceSpec& space) {
    std::ostringstream os;
    os << "index";
    for (const auto& p : space.parameters) os << "," << p.name << "_mm";
    os << ",status,mesh_attempts,drag_N,wall_s";
    return os.str();
}

std::set<long> existing_row_indices(const fs::path& path) {
    std::set<long> present;
    std::ifstream in(path);
    if (!in) return present;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            present.insert(std::stol(line.substr(0, line.find(','))));
        } catch (const std::exception&) {
            // ignore malformed line; it will be regenerated
        }
    }
    return present;
}

void rewrite_sorted(const fs::path& path, const std::string& header) {
    std::ifstream in(path);
    if (!in) return;
    std::string line;
    std::getline(in, line);
    std::map<long, std::string> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            rows[std::stol(line.substr(0, line.find(',')))] = line;
        } catch (const std::exception&) {
        }
    }
    in.close();
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        out << header << "\n";
        for (const auto& [idx, row] : rows) out << row << "\n";
    }
    fs::rename(tmp, path);
}

} // namespace

int run_data_generation(const RunContext& ctx) {
    ensure_out_dir(ctx);
    ManifestWriter manifest(ctx);
    try {
        const RunConfig& cfg = ctx.config;
        const SamplingSpec& sampling = *cfg.sampling;
        const DesignSpaceSpec& space = cfg.design;
        Clock::time_point t0 = Clock::now();

        DesignEvaluator evaluator(ctx);

        SamplePlan plan;
        switch (sampling.method) {
            case SamplingMethod::UniformRandom:
                plan = uniform_random(sampling.count, space.dimension(), cfg.rng_seed);
                break;
            case SamplingMethod::LhsMaximin:
                plan = lhs_maximin(sampling.count, space.dimension(), cfg.rng_seed, 2000);
                break;
            case SamplingMethod::LhsMinCorr:
                plan = lhs_mincorr(sampling.count, space.dimension(), cfg.rng_seed, 2000);
                break;
        }
        auto assignments = scale_to_space(plan, space);
        manifest.stage("sampling", seconds_since(t0));

        // Column sidecar.
        {
            json cols = json::array();
            cols.push_back({{"name", "index"}, {"unit", "1"}});
            for (const auto& p : space.parameters) {
                cols.push_back({{"name", p.name + "_mm"}, {"unit", "mm"}});
            }
            cols.push_back({{"name", "status"}, {"unit", "ok or error text"}});
            cols.push_back({{"name", "mesh_attempts"}, {"unit", "1"}});
            cols.push_back({{"name", "drag_N"}, {"unit", "N"}});
            cols.push_back({{"name", "wall_s"}, {"unit", "s"}});
            std::ofstream(ctx.out_dir / "dataset_columns.json")
                << json{{"columns", cols}}.dump(2) << "\n";
        }

        const fs::path csv = dataset_path(ctx);
        const std::string header = dataset_header(space);
        std::set<long> present = existing_row_indices(csv);
        bool resuming = !present.empty();
        std::vector<long> todo;
        for (long i = 0; i < sampling.count; ++i) {
            if (!present.count(i)) todo.push_back(i);
        }
        if (resuming) {
            std::fprintf(stderr, "[anvil] resume: %zu of %d rows already present\n",
                         present.size(), sampling.count);
        }

        std::ofstream out;
        if (resuming) {
            out.open(csv, std::ios::app);
        } else {
            out.open(csv);
            out << header << "\n";
            out.flush();
        }
        if (!out) {
            throw Error(Err::IoFailure, "cannot open dataset for writing: " + csv.string());
        }

        t0 = Clock::now();
        long failures = 0;

        auto eval_one = [&](long i) {
            SampleRow row;
            row.index = i;
            row.params_mm = assignments[static_cast<std::size_t>(i)];
            Clock::time_point ts = Clock::now();
            try {
                auto res = evaluator.evaluate(row.params_mm, "sample_" + std::to_string(i));
                row.mesh_attempts = res.mesh_attempts;
                row.drag_N = res.report.drag_N;
            } catch (const AutoMeshExhaustedError& e) {
                row.status = std::string("mesh_failure: ") + e.what();
                row.mesh_attempts = static_cast<int>(e.attempts().size());
            } catch (const std::exception& e) {
                row.status = std::string("error: ") + e.what();
            }
            row.wall_s = seconds_since(ts);
            return row;
        };

        long written_since_flush = 0;
        auto write_row = [&](const SampleRow& row) {
            out << row.to_csv() << "\n";
            if (row.status != "ok") ++failures;
            if (++written_since_flush >= sampling.batch_size) {
                out.flush();
                written_since_flush = 0;
            }
        };

        if (ctx.workers <= 1) {
            for (long i : todo) write_row(eval_one(i));
        } else {
            std::mutex mu;
            std::condition_variable cv;
            std::map<long, SampleRow> done;
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> pool;
            for (int w = 0; w < ctx.workers; ++w) {
                pool.emplace_back([&] {
                    for (;;) {
                        std::size_t k = next.fetch_add(1);
                        if (k >= todo.size()) return;
                        SampleRow row = eval_one(todo[k]);
                        {
                            std::lock_guard<std::mutex> lock(mu);
                            done.emplace(row.index, std::move(row));
                        }
                        cv.notify_one();
                    }
                });
            }
            // Drain in index order so the file stays ordered even with a pool.
            std::size_t drained = 0;
            std::size_t want = 0;
            std::unique_lock<std::mutex> lock(mu);
            while (drained < todo.size()) {
                cv.wait(lock, [&] { return done.count(todo[want]) > 0; });
                while (want < todo.size() && done.count(todo[want])) {
                    write_row(done.at(todo[want]));
                    done.erase(todo[want]);
                    ++want;
                    ++drained;
                }
            }
            lock.unlock();
            for (auto& t : pool) t.join();
        }
        out.flush();
        out.close();
        if (resuming) {
            rewrite_sorted(csv, header);
        }
        manifest.stage("evaluation", seconds_since(t0));
        if (failures > 0) manifest.count_failure("sample_failures");
        log_stage("data generation", seconds_since(t0));
        manifest.write(true);
        return kExitOk;
    } catch (const Error& e) {
        manifest.write(false, e.what());
        std::fprintf(stderr, "[anvil] fatal: %s\n", e.what());
        return e.code() == Err::IoFailure ? kExitFatal : kExitFatal;
    }
}

// ---------------------------------------------------------------------------
// single CFD evaluation
// ---------------------------------------------------------------------------

int run_cfd(const RunContext& ctx, const std::optional<std::string>& stl_override,
            const std::map<std::string, double>& param_overrides) {
    ensure_out_dir(ctx);
    ManifestWriter manifest(ctx);
    try {
        const RunConfig& cfg = ctx.config;
        Clock::time_point t0 = Clock::now();
        DesignEvaluator evaluator(ctx);

        TriMesh body;
        if (stl_override || cfg.design.seed_design == SeedDesign::ExternalStl) {
            std::string path = stl_override ? *stl_override : cfg.design.stl_path;
            if (!fs::exists(path)) {
                throw Error(Err::IoFailure, "STL file not found: " + path);
            }
            StlDiagnostics diag;
            body = read_stl_file(path, &diag);
            std::fprintf(stderr,
                         "[anvil] stl: %zu triangles, watertight=%d, bbox x [%g, %g] mm\n",
                         diag.triangle_count, diag.watertight ? 1 : 0,
                         diag.bounding_box_mm.lo.x, diag.bounding_box_mm.hi.x);
        } else {
            ParameterTable t = evaluator.seed_table();
            if (!param_overrides.empty()) {
                t = apply_parameters(t, param_overrides);
            }
            std::vector<double> params;
            for (const auto& p : cfg.design.parameters) params.push_back(t.value(p.name));
            body = evaluator.instantiate(params);
        }
        manifest.stage("geometry", seconds_since(t0));

        t0 = Clock::now();
        std::string field_path = (ctx.out_dir / "field.vtk").string();
        auto res = evaluator.evaluate_mesh(
            body, "cfd",
            cfg.solver_backend == SolverBackend::Internal
                ? std::optional<std::string>(field_path)
                : std::nullopt);
        manifest.stage("mesh_and_solve", seconds_since(t0));
        log_stage("cfd evaluation", res.wall_s);

        json rep = {{"drag_N", res.report.drag_N},
                    {"force_N", {res.report.force_N.x, res.report.force_N.y,
                                 res.report.force_N.z}},
                    {"reference_area_m2", res.report.reference_area_m2},
                    {"drag_coefficient", res.report.drag_coefficient},
                    {"reynolds", res.report.reynolds},
                    {"solver_iterations", res.report.iterations},
                    {"mesh_attempts", res.mesh_attempts}};
        std::ofstream(ctx.out_dir / "drag_report.json") << rep.dump(2) << "\n";

        manifest.write(true);
        return kExitOk;
    } catch (const AutoMeshExhaustedError& e) {
        manifest.write(false, e.what());
        std::fprintf(stderr, "[anvil] %s\n", e.what());
        return kExitExhausted;
    } catch (const Error& e) {
        manifest.write(false, e.what());
        std::fprintf(stderr, "[anvil] fatal: %s\n", e.what());
        return kExitFatal;
    }
}

// ---------------------------------------------------------------------------
// optimization
// ---------------------------------------------------------------------------

int run_optimize(const RunContext& ctx) {
    ensure_out_dir(ctx);
    ManifestWriter manifest(ctx);
    const RunConfig& cfg = ctx.config;
    const DesignSpaceSpec& space = cfg.design;
    try {
        Clock::time_point t0 = Clock::now();
        DesignEvaluator evaluator(ctx);

        std::atomic<long> eval_counter{0};
        BoEvaluator bo_eval = [&](std::span<const double> unit) -> double {
            long id = eval_counter.fetch_add(1);
            std::vector<double> params(unit.size());
            for (std::size_t j = 0; j < unit.size(); ++j) {
                const DesignParameter& p = space.parameters[j];
                params[j] = p.min_mm + (p.max_mm - p.min_mm) * unit[j];
            }
            auto res = evaluator.evaluate(params, "opt_" + std::to_string(id));
            std::fprintf(stderr, "[anvil] eval %3ld  drag %.6g N  (%.1f s)\n", id,
                         res.report.drag_N, res.wall_s);
            return res.report.drag_N;
        };

        auto finish = [&](const BoHistory& history, bool success,
                          const std::string& error) {
            write_history_csv(history, space, (ctx.out_dir / "history.csv").string());
            write_summary_json(history, space, (ctx.out_dir / "summary.json").string());
            if (!history.best_x.empty()) {
                std::vector<double> params(history.best_x.size());
                for (std::size_t j = 0; j < history.best_x.size(); ++j) {
                    const DesignParameter& p = space.parameters[j];
                    params[j] = p.min_mm + (p.max_mm - p.min_mm) * history.best_x[j];
                }
                TriMesh best = evaluator.instantiate(params);
                write_stl_file(best, (ctx.out_dir / "best_design.stl").string(),
                               StlFormat::Binary, "anvil_best_design");
            }
            manifest.stage("optimization", seconds_since(t0));
            manifest.write(success, error);
        };

        try {
            BoHistory history = bo_loop(bo_eval, space.dimension(), *cfg.optimizer,
                                        cfg.rng_seed);
            log_stage("optimization", seconds_since(t0));
            finish(history, true, "");
            return kExitOk;
        } catch (const AllEvaluationsFailedError& e) {
            finish(e.history(), false, e.what());
            std::fprintf(stderr, "[anvil] %s\n", e.what());
            return kExitExhausted;
        }
    } catch (const Error& e) {
        manifest.write(false, e.what());
        std::fprintf(stderr, "[anvil] fatal: %s\n", e.what());
        return kExitFatal;
    }
}

} // namespace anvil
