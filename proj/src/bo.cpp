#include "anvil/bo.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "anvil/sampling.hpp"

namespace anvil {

using nlohmann::json;

BoHistory bo_loop(const BoEvaluator& evaluator, int dimension, const BoSpec& spec,
                  std::uint64_t seed) {
    if (dimension < 1 || dimension > 20) {
        throw Error(Err::DimensionLimitExceeded, "dimension outside [1, 20]");
    }
    if (!(spec.initial_samples < spec.budget)) {
        throw Error(Err::RangeViolation, "initial_samples must be < budget");
    }

    BoHistory history;
    Dataset data;
    double best = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd best_x;

    auto run_eval = [&](const Eigen::VectorXd& x, BoRecord rec) {
        rec.x.assign(x.data(), x.data() + x.size());
        try {
            double y = evaluator(std::span<const double>(rec.x.data(), rec.x.size()));
            if (!std::isfinite(y)) {
                throw Error(Err::NonFiniteObjective, "evaluator returned a non-finite value");
            }
            rec.y = y;
            data.add(x, y);
            if (std::isnan(best) || y < best) {
                best = y;
                best_x = x;
            }
        } catch (const std::exception& e) {
            rec.failure = e.what();
            ++history.failures;
        }
        rec.best_so_far = best;
        history.records.push_back(std::move(rec));
    };

    // Initial design.
    SamplePlan init = lhs_maximin(static_cast<std::size_t>(spec.initial_samples),
                                  static_cast<std::size_t>(dimension),
                                  mix_seed(seed, 0x696E6974ULL), 256);
    for (int i = 0; i < spec.initial_samples; ++i) {
        Eigen::VectorXd x(dimension);
        for (int j = 0; j < dimension; ++j) {
            x(j) = init.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
        BoRecord rec;
        rec.iteration = i + 1;
        rec.phase = "initial";
        run_eval(x, std::move(rec));
    }

    // Model-driven phase.
    long bo_successes = 0, bo_attempts = 0;
    for (int it = spec.initial_samples; it < spec.budget; ++it) {
        if (data.size() == 0) {
            throw AllEvaluationsFailedError(
                history, "no successful evaluations to train the surrogate on");
        }
        GpFitOptions fit_opts;
        fit_opts.seed = mix_seed(seed, 0xF17 + static_cast<std::uint64_t>(it));
        fit_opts.fixed_noise = spec.noise_variance;
        GpModel model = GpModel::fit(data, fit_opts);

        Eigen::VectorXd x =
            propose_next(model, spec.kappa, mix_seed(seed, 0xACC + static_cast<std::uint64_t>(it)));

        BoRecord rec;
        rec.iteration = it + 1;
        rec.phase = "bo";
        rec.acquisition = acquire_lcb(model, x, spec.kappa);
        rec.lengthscales.assign(model.lengthscales().data(),
                                model.lengthscales().data() + model.lengthscales().size());
        rec.signal_variance = model.signal_variance_standardized();
        rec.noise_variance = model.noise_variance_standardized();
        ++bo_attempts;
        std::size_t before = data.size();
        run_eval(x, std::move(rec));
        if (data.size() > before) ++bo_successes;
    }

    if (bo_attempts > 0 && bo_successes == 0) {
        throw AllEvaluationsFailedError(history,
                                        "every model-driven evaluation failed (" +
                                            std::to_string(bo_attempts) + " attempts)");
    }

    if (!std::isnan(best)) {
        history.best_y = best;
        history.best_x.assign(best_x.data(), best_x.data() + best_x.size());
    }
    return history;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void write_history_csv(const BoHistory& history, const DesignSpaceSpec& space,
                       const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(Err::IoFailure, "cannot open for writing: " + path);
    }
    out << "iteration,phase";
    for (const auto& p : space.parameters) out << "," << p.name << "_mm";
    out << ",drag_N,failure,best_N,acquisition";
    for (std::size_t j = 0; j < space.parameters.size(); ++j) out << ",lengthscale_" << j;
    out << ",signal_variance,noise_variance\n";
    for (const BoRecord& r : history.records) {
        out << r.iteration << "," << r.phase;
        for (std::size_t j = 0; j < space.parameters.size(); ++j) {
            const DesignParameter& p = space.parameters[j];
            double phys = j < r.x.size() ? p.min_mm + (p.max_mm - p.min_mm) * r.x[j]
                                         : std::numeric_limits<double>::quiet_NaN();
            out << "," << fmt(phys);
        }
        out << "," << (r.y ? fmt(*r.y) : "") << ",";
        std::string failure = r.failure;
        for (char& c : failure) {
            if (c == ',' || c == '\n' || c == '"') c = ';';
        }
        out << failure << "," << (std::isnan(r.best_so_far) ? "" : fmt(r.best_so_far)) << ","
            << (std::isnan(r.acquisition) ? "" : fmt(r.acquisition));
        for (std::size_t j = 0; j < space.parameters.size(); ++j) {
            out << "," << (j < r.lengthscales.size() ? fmt(r.lengthscales[j]) : "");
        }
        out << "," << (std::isnan(r.signal_variance) ? "" : fmt(r.signal_variance)) << ","
            << (std::isnan(r.noise_variance) ? "" : fmt(r.noise_variance)) << "\n";
    }
}

void write_summary_json(const BoHistory& history, const DesignSpaceSpec& space,
                        const std::string& path) {
    json j;
    j["evaluations"] = history.records.size();
    j["failures"] = history.failures;
    if (!history.best_x.empty()) {
        j["best_drag_N"] = history.best_y;
        json params = json::object();
        for (std::size_t k = 0; k < space.parameters.size(); ++k) {
            const DesignParameter& p = space.parameters[k];
            params[p.name] = p.min_mm + (p.max_mm - p.min_mm) * history.best_x[k];
        }
        j["best_parameters_mm"] = params;
        j["best_unit_coords"] = history.best_x;
    }
    for (auto it = history.records.rbegin(); it != history.records.rend(); ++it) {
        if (!it->lengthscales.empty()) {
            j["final_model"] = {{"lengthscales", it->lengthscales},
                                {"signal_variance", it->signal_variance},
                                {"noise_variance", it->noise_variance}};
            break;
        }
    }
    std::ofstream out(path);
    if (!out) {
        throw Error(Err::IoFailure, "cannot open for writing: " + path);
    }
    out << j.dump(2) << "\n";
}

double synthetic_drag_proxy7(std::span<const double> x) {
    if (x.size() != 7) {
        throw Error(Err::DimensionMismatch, "proxy expects 7 coordinates");
    }
    static const double w[7] = {1.2, 0.8, 2.0, 1.5, 0.6, 1.8, 1.0};
    static const double z[7] = {0.62, 0.31, 0.55, 0.44, 0.70, 0.23, 0.50};
    double v = 0.8;
    for (int i = 0; i < 7; ++i) {
        double d = x[i] - z[i];
        v += w[i] * d * d;
    }
    v += 0.3 * (x[0] - z[0]) * (x[1] - z[1]);
    return v;
}

} // namespace anvil
