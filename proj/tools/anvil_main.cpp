// anvil: config-driven shape evaluation and optimization.
//   anvil data-gen  --config c.json [--out dir] [--workers n]
//   anvil cfd       --config c.json [--stl design.stl] [--set name=value ...]
//   anvil optimize  --config c.json [--out dir]

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "anvil/orchestrator.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw anvil::Error(anvil::Err::IoFailure, "cannot open config: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct ModeArgs {
    std::string config_path;
    std::string out_override;
    std::string stl_path;
    std::vector<std::string> set_params;
    int workers = 1;
};

int dispatch(anvil::RunMode cli_mode, const ModeArgs& args) {
    using namespace anvil;
    std::string text = read_file(args.config_path);
    RunConfig config = parse_config(text);
    if (config.mode != cli_mode) {
        std::fprintf(stderr,
                     "[anvil] mode mismatch: CLI asked for '%s' but the config says '%s'\n",
                     to_string(cli_mode), to_string(config.mode));
        return kExitFatal;
    }
    RunContext ctx;
    ctx.config = std::move(config);
    ctx.config_text = std::move(text);
    ctx.out_dir = args.out_override.empty() ? ctx.config.output_dir : args.out_override;
    ctx.workers = std::max(1, args.workers);

    switch (cli_mode) {
        case RunMode::DataGeneration:
            return run_data_generation(ctx);
        case RunMode::Cfd: {
            std::optional<std::string> stl;
            if (!args.stl_path.empty()) stl = args.stl_path;
            std::map<std::string, double> overrides;
            for (const std::string& kv : args.set_params) {
                auto eq = kv.find('=');
                if (eq == std::string::npos) {
                    std::fprintf(stderr, "[anvil] bad --set '%s' (use name=value)\n",
                                 kv.c_str());
                    return kExitFatal;
                }
                overrides[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
            }
            return run_cfd(ctx, stl, overrides);
        }
        case RunMode::Optimize:
            return run_optimize(ctx);
    }
    return kExitFatal;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"anvil: parametric design evaluation and drag optimization"};
    app.require_subcommand(1);

    ModeArgs args;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config_path, "run configuration JSON")->required();
        sub->add_option("--out", args.out_override, "override the config's output_dir");
    };

    CLI::App* data_gen = app.add_subcommand("data-gen", "sample the design space and save CFD results");
    add_common(data_gen);
    data_gen->add_option("--workers", args.workers, "parallel sample evaluations");

    CLI::App* cfd = app.add_subcommand("cfd", "evaluate a single design");
    add_common(cfd);
    cfd->add_option("--stl", args.stl_path, "evaluate this STL instead of the seed design");
    cfd->add_option("--set", args.set_params, "override a seed parameter (name=value, mm)");

    CLI::App* optimize = app.add_subcommand("optimize", "search for the minimum-drag design");
    add_common(optimize);

    CLI11_PARSE(app, argc, argv);

    try {
        if (data_gen->parsed()) return dispatch(anvil::RunMode::DataGeneration, args);
        if (cfd->parsed()) return dispatch(anvil::RunMode::Cfd, args);
        if (optimize->parsed()) return dispatch(anvil::RunMode::Optimize, args);
    } catch (const anvil::Error& e) {
        std::fprintf(stderr, "[anvil] %s\n", e.what());
        return anvil::kExitFatal;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "[anvil] unexpected: %s\n", e.what());
        return anvil::kExitFatal;
    }
    return anvil::kExitFatal;
}
