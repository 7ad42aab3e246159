#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anvil/config.hpp"
#include "anvil/gp.hpp"

namespace anvil {

struct BoRecord {
    int iteration = 0;          // 1-based over the whole budget
    std::string phase;          // "initial" | "bo"
    std::vector<double> x;      // unit-cube coordinates
    std::optional<double> y;    // drag (N); absent when the evaluation failed
    std::string failure;        // error text for failed evaluations
    double best_so_far = std::numeric_limits<double>::quiet_NaN();
    double acquisition = std::numeric_limits<double>::quiet_NaN(); // bo phase only
    std::vector<double> lengthscales; // model at proposal time (bo phase)
    double signal_variance = std::numeric_limits<double>::quiet_NaN();
    double noise_variance = std::numeric_limits<double>::quiet_NaN();
};

struct BoHistory {
    std::vector<BoRecord> records;
    std::vector<double> best_x; // unit cube
    double best_y = std::numeric_limits<double>::quiet_NaN();
    long failures = 0;
};

class AllEvaluationsFailedError : public Error {
public:
    explicit AllEvaluationsFailedError(BoHistory history, const std::string& what)
        : Error(Err::AllEvaluationsFailed, what), history_(std::move(history)) {}
    const BoHistory& history() const { return history_; }

private:
    BoHistory history_;
};

/// Evaluator over the unit cube; throwing marks the point as failed (it is
/// recorded and excluded from the surrogate's training set).
using BoEvaluator = std::function<double(std::span<const double>)>;

/// Sequential Bayesian optimization: LHS-maximin initial design, then
/// fit -> LCB-propose -> evaluate until `spec.budget` evaluations total.
BoHistory bo_loop(const BoEvaluator& evaluator, int dimension, const BoSpec& spec,
                  std::uint64_t seed);

/// History CSV: one row per evaluation (iteration, phase, unit coords,
/// physical parameters, drag, best-so-far, acquisition, hyperparameters).
void write_history_csv(const BoHistory& history, const DesignSpaceSpec& space,
                       const std::string& path);

/// Incumbent + final hyperparameters as JSON.
void write_summary_json(const BoHistory& history, const DesignSpaceSpec& space,
                        const std::string& path);

/// Built-in smooth 7-d drag stand-in used by the sample-efficiency checks:
/// positive-definite quadratic with one cross term, minimum 0.8 N at
/// (0.62, 0.31, 0.55, 0.44, 0.70, 0.23, 0.50).
double synthetic_drag_proxy7(std::span<const double> x);

} // namespace anvil
