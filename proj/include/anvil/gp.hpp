#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "anvil/common.hpp"

namespace anvil {

/// Observations in the unit cube. Rows must stay unique (within 1e-12); drag
/// values must be finite.
struct Dataset {
    Eigen::MatrixXd X; // n x d
    Eigen::VectorXd y; // n

    std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(X.cols()); }
    void add(const Eigen::VectorXd& x, double value);
};

struct GpHyperBounds {
    double ls_min = 1e-3, ls_max = 10.0;     // lengthscales, unit-cube units
    double sv_min = 1e-6, sv_max = 1e3;      // signal variance, standardized y
    double noise_min = 0.0, noise_max = 1.0; // noise variance, standardized y
};

struct GpFitOptions {
    GpHyperBounds bounds;
    int starts = 8;
    int max_iters = 120;
    std::uint64_t seed = 0;
    std::optional<double> fixed_noise; // standardized-y units; fitted when absent
    double jitter = 1e-8;
};

/// Anisotropic RBF + white noise Gaussian-process regressor,
///   k(x,x') = sv * exp(-1/2 sum_i (x_i-x'_i)^2 / ls_i^2) + noise * delta,
/// fitted by multi-start projected gradient ascent on the log marginal
/// likelihood (y standardized internally).
class GpModel {
public:
    static GpModel fit(const Dataset& data, const GpFitOptions& opts = {});

    /// Predictive mean and (latent, noise-free) variance at x; variance is
    /// clamped at zero and clamp events are counted.
    std::pair<double, double> posterior(const Eigen::VectorXd& x) const;

    double log_marginal() const { return log_marginal_; }
    const Eigen::VectorXd& lengthscales() const { return ls_; }
    double signal_variance_standardized() const { return sv_; }
    double signal_variance() const { return sv_ * ystd_ * ystd_; }
    double noise_variance_standardized() const { return noise_; }
    double jitter() const { return jitter_; }
    double y_mean() const { return ymean_; }
    double y_std() const { return ystd_; }
    long clamp_events() const { return clamp_count_.load(); }
    std::size_t dim() const { return static_cast<std::size_t>(ls_.size()); }
    const Eigen::MatrixXd& train_x() const { return X_; }

    /// || (K + noise I) alpha - y~ || on the standardized targets.
    double factorization_residual() const;

    /// Log marginal likelihood of this dataset at explicit hyperparameters
    /// (used by the fit and by the random-search oracle test).
    static double log_marginal_at(const Dataset& data, const Eigen::VectorXd& ls, double sv,
                                  double noise, double jitter = 1e-8);

    GpModel(const GpModel& o);
    GpModel& operator=(const GpModel& o);

private:
    GpModel() = default;
    void factorize(const Dataset& data);

    Eigen::VectorXd ls_;
    double sv_ = 1.0;
    double noise_ = 1e-6;
    double jitter_ = 1e-8;
    Eigen::MatrixXd X_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
    Eigen::VectorXd ytilde_;
    double ymean_ = 0.0, ystd_ = 1.0;
    double log_marginal_ = 0.0;
    mutable std::atomic<long> clamp_count_{0};
};

/// LCB(x) = mean(x) - kappa * sqrt(variance(x)); minimized by the proposer.
double acquire_lcb(const GpModel& model, const Eigen::VectorXd& x, double kappa);

/// Approximate LCB minimizer: 2048 quasi-random candidates (additive
/// golden-ratio sequence) followed by coordinate-descent polish of the best
/// eight; the result is nudged away from existing training rows.
Eigen::VectorXd propose_next(const GpModel& model, double kappa, std::uint64_t seed);

} // namespace anvil
