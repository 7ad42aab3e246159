#include "anvil/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace anvil {

namespace {

Eigen::MatrixXd rbf_matrix(const Eigen::MatrixXd& X, const Eigen::VectorXd& ls) {
    const auto n = X.rows();
    Eigen::MatrixXd R(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        R(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (Eigen::Index k = 0; k < X.cols(); ++k) {
                double d = (X(i, k) - X(j, k)) / ls(k);
                s += d * d;
            }
            R(i, j) = R(j, i) = std::exp(-0.5 * s);
        }
    }
    return R;
}

struct Standardized {
    Eigen::VectorXd y;
    double mean = 0.0, std = 1.0;
};

Standardized standardize(const Eigen::VectorXd& y) {
    Standardized s;
    s.mean = y.mean();
    double var = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double c = y(i) - s.mean;
        var += c * c;
    }
    var /= std::max<double>(1.0, static_cast<double>(y.size()));
    s.std = var > 0.0 ? std::sqrt(var) : 1.0;
    s.y = (y.array() - s.mean) / s.std;
    return s;
}

/// Generalized golden-ratio additive sequence (quasi-random, deterministic).
class Rsequence {
public:
    Rsequence(std::size_t d, std::uint64_t seed) : alpha_(d), state_(d) {
        double phi = 2.0;
        for (int it = 0; it < 64; ++it) {
            phi = std::pow(1.0 + phi, 1.0 / (static_cast<double>(d) + 1.0));
        }
        Rng rng(seed);
        for (std::size_t j = 0; j < d; ++j) {
            alpha_[j] = std::fmod(1.0 / std::pow(phi, static_cast<double>(j + 1)), 1.0);
            state_[j] = rng.uniform();
        }
    }

    Eigen::VectorXd next() {
        Eigen::VectorXd x(state_.size());
        for (std::size_t j = 0; j < state_.size(); ++j) {
            state_[j] += alpha_[j];
            if (state_[j] >= 1.0) state_[j] -= 1.0;
            x(static_cast<Eigen::Index>(j)) = state_[j];
        }
        return x;
    }

private:
    std::vector<double> alpha_;
    std::vector<double> state_;
};

} // namespace

void Dataset::add(const Eigen::VectorXd& x, double value) {
    if (!std::isfinite(value)) {
        throw Error(Err::NonFiniteObjective, "observation is not finite");
    }
    if (X.rows() > 0 && X.cols() != x.size()) {
        throw Error(Err::DimensionMismatch, "observation dimension mismatch");
    }
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        if ((X.row(i).transpose() - x).norm() < 1e-12) {
            throw Error(Err::SingularKernel, "duplicate training input (within 1e-12)");
        }
    }
    X.conservativeResize(X.rows() + 1, x.size());
    X.row(X.rows() - 1) = x.transpose();
    y.conservativeResize(y.size() + 1);
    y(y.size() - 1) = value;
}

GpModel::GpModel(const GpModel& o)
    : ls_(o.ls_), sv_(o.sv_), noise_(o.noise_), jitter_(o.jitter_), X_(o.X_), llt_(o.llt_),
      alpha_(o.alpha_), ytilde_(o.ytilde_), ymean_(o.ymean_), ystd_(o.ystd_),
      log_marginal_(o.log_marginal_), clamp_count_(o.clamp_count_.load()) {}

GpModel& GpModel::operator=(const GpModel& o) {
    ls_ = o.ls_;
    sv_ = o.sv_;
    noise_ = o.noise_;
    jitter_ = o.jitter_;
    X_ = o.X_;
    llt_ = o.llt_;
    alpha_ = o.alpha_;
    ytilde_ = o.ytilde_;
    ymean_ = o.ymean_;
    ystd_ = o.ystd_;
    log_marginal_ = o.log_marginal_;
    clamp_count_.store(o.clamp_count_.load());
    return *this;
}

double GpModel::log_marginal_at(const Dataset& data, const Eigen::VectorXd& ls, double sv,
                                double noise, double jitter) {
    const auto n = data.X.rows();
    Standardized st = standardize(data.y);
    Eigen::MatrixXd K = sv * rbf_matrix(data.X, ls);
    K.diagonal().array() += noise + jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success) {
        return -std::numeric_limits<double>::infinity();
    }
    Eigen::VectorXd alpha = llt.solve(st.y);
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(llt.matrixL()(i, i));
    return -0.5 * st.y.dot(alpha) - logdet -
           0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

void GpModel::factorize(const Dataset& data) {
    X_ = data.X;
    Standardized st = standardize(data.y);
    ymean_ = st.mean;
    ystd_ = st.std;
    ytilde_ = st.y;

    // Progressive jitter: start without any so that exact noiseless
    // interpolation is preserved, escalate only if the factorization fails.
    const double ladder[] = {0.0, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4};
    for (double jitter : ladder) {
        Eigen::MatrixXd K = sv_ * rbf_matrix(X_, ls_);
        K.diagonal().array() += noise_ + jitter;
        llt_.compute(K);
        if (llt_.info() == Eigen::Success) {
            alpha_ = llt_.solve(ytilde_);
            double logdet = 0.0;
            for (Eigen::Index i = 0; i < K.rows(); ++i) {
                logdet += std::log(llt_.matrixL()(i, i));
            }
            log_marginal_ = -0.5 * ytilde_.dot(alpha_) - logdet -
                            0.5 * static_cast<double>(K.rows()) *
                                std::log(2.0 * std::numbers::pi);
            jitter_ = jitter;
            return;
        }
    }
    throw Error(Err::SingularKernel,
                "kernel matrix not positive definite (near-duplicate rows?)");
}

GpModel GpModel::fit(const Dataset& data, const GpFitOptions& opts) {
    const auto n = data.X.rows();
    const auto d = data.X.cols();
    if (n < 1) {
        throw Error(Err::RangeViolation, "empty dataset");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(data.y(i))) {
            throw Error(Err::NonFiniteObjective, "non-finite training target");
        }
    }

    GpModel model;
    model.jitter_ = opts.jitter;
    const GpHyperBounds& b = opts.bounds;

    if (n == 1) {
        // Too little data for likelihood fitting: prior defaults.
        model.ls_ = Eigen::VectorXd::Constant(d, 0.3);
        model.sv_ = 1.0;
        model.noise_ = opts.fixed_noise.value_or(1e-6);
        model.factorize(data);
        return model;
    }

    const bool fit_noise = !opts.fixed_noise.has_value();
    const int np = static_cast<int>(d) + 1 + (fit_noise ? 1 : 0);

    // Work in log space; noise uses log(noise + floor) to allow zero.
    const double noise_floor = 1e-10;
    auto clamp_theta = [&](Eigen::VectorXd& t) {
        for (Eigen::Index k = 0; k < d; ++k) {
            t(k) = std::clamp(t(k), std::log(b.ls_min), std::log(b.ls_max));
        }
        t(d) = std::clamp(t(d), std::log(b.sv_min), std::log(b.sv_max));
        if (fit_noise) {
            t(d + 1) = std::clamp(t(d + 1), std::log(b.noise_min + noise_floor),
                                  std::log(b.noise_max + noise_floor));
        }
    };
    auto unpack = [&](const Eigen::VectorXd& t, Eigen::VectorXd& ls, double& sv,
                      double& noise) {
        ls = t.head(d).array().exp();
        sv = std::exp(t(d));
        noise = fit_noise ? std::exp(t(d + 1)) - noise_floor
                          : std::clamp(*opts.fixed_noise, b.noise_min, b.noise_max);
        noise = std::max(noise, 0.0);
    };

    Standardized st = standardize(data.y);

    // Likelihood and gradient at theta (standardized targets).
    auto eval = [&](const Eigen::VectorXd& t, Eigen::VectorXd* grad) -> double {
        Eigen::VectorXd ls;
        double sv, noise;
        unpack(t, ls, sv, noise);
        Eigen::MatrixXd R = rbf_matrix(data.X, ls);
        Eigen::MatrixXd K = sv * R;
        K.diagonal().array() += noise + opts.jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(K);
        if (llt.info() != Eigen::Success) {
            return -std::numeric_limits<double>::infinity();
        }
        Eigen::VectorXd alpha = llt.solve(st.y);
        double logdet = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(llt.matrixL()(i, i));
        double lml = -0.5 * st.y.dot(alpha) - logdet -
                     0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
        if (grad) {
            Eigen::MatrixXd Kinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
            Eigen::MatrixXd W = alpha * alpha.transpose() - Kinv; // d lml = 1/2 tr(W dK)
            for (Eigen::Index k = 0; k < d; ++k) {
                double g = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    for (Eigen::Index j = 0; j < n; ++j) {
                        double diff = (data.X(i, k) - data.X(j, k)) / ls(k);
                        g += W(i, j) * sv * R(i, j) * diff * diff;
                    }
                }
                (*grad)(k) = 0.5 * g;
            }
            double gsv = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = 0; j < n; ++j) {
                    gsv += W(i, j) * sv * R(i, j);
                }
            }
            (*grad)(d) = 0.5 * gsv;
            if (fit_noise) {
                // dK/d t_noise = (noise + floor) I
                (*grad)(d + 1) = 0.5 * W.trace() * (noise + noise_floor);
            }
        }
        return lml;
    };

    // Multi-start projected gradient ascent.
    Rsequence seq(static_cast<std::size_t>(np), mix_seed(opts.seed, 0x6770ULL));
    Eigen::VectorXd best_theta;
    double best_lml = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < opts.starts; ++s) {
        Eigen::VectorXd t(np);
        if (s == 0) {
            for (Eigen::Index k = 0; k < d; ++k) t(k) = std::log(0.3);
            t(d) = 0.0;
            if (fit_noise) t(d + 1) = std::log(1e-4 + noise_floor);
        } else {
            Eigen::VectorXd u = seq.next();
            for (Eigen::Index k = 0; k < d; ++k) {
                t(k) = std::log(b.ls_min) + u(k) * (std::log(b.ls_max) - std::log(b.ls_min));
            }
            t(d) = std::log(b.sv_min) + u(d) * (std::log(b.sv_max) - std::log(b.sv_min));
            if (fit_noise) {
                t(d + 1) = std::log(noise_floor + b.noise_min) +
                           u(d + 1) * (std::log(b.noise_max + noise_floor) -
                                       std::log(b.noise_min + noise_floor));
            }
        }
        clamp_theta(t);

        Eigen::VectorXd grad(np);
        double lml = eval(t, &grad);
        if (!std::isfinite(lml)) continue;
        double step = 0.1;
        for (int it = 0; it < opts.max_iters; ++it) {
            if (grad.lpNorm<Eigen::Infinity>() < 1e-6) break;
            Eigen::VectorXd trial = t + step * grad;
            clamp_theta(trial);
            double trial_lml = eval(trial, nullptr);
            if (std::isfinite(trial_lml) && trial_lml > lml) {
                t = trial;
                lml = eval(t, &grad);
                step = std::min(step * 1.3, 1.0);
            } else {
                step *= 0.5;
                if (step < 1e-7) break;
            }
        }
        if (lml > best_lml) {
            best_lml = lml;
            best_theta = t;
        }
    }
    if (!std::isfinite(best_lml)) {
        throw Error(Err::NonFiniteObjective,
                    "log marginal likelihood not finite at any start");
    }

    Eigen::VectorXd ls;
    double sv, noise;
    unpack(best_theta, ls, sv, noise);
    model.ls_ = ls;
    model.sv_ = sv;
    model.noise_ = noise;
    model.factorize(data);
    return model;
}

std::pair<double, double> GpModel::posterior(const Eigen::VectorXd& x) const {
    const auto n = X_.rows();
    Eigen::VectorXd kstar(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < X_.cols(); ++k) {
            double d = (X_(i, k) - x(k)) / ls_(k);
            s += d * d;
        }
        kstar(i) = sv_ * std::exp(-0.5 * s);
    }
    double mean_std = kstar.dot(alpha_);
    Eigen::VectorXd v = llt_.matrixL().solve(kstar);
    double var_std = sv_ - v.squaredNorm();
    if (var_std < 0.0) {
        var_std = 0.0;
        clamp_count_.fetch_add(1);
    }
    return {ymean_ + ystd_ * mean_std, ystd_ * ystd_ * var_std};
}

double GpModel::factorization_residual() const {
    Eigen::MatrixXd K = sv_ * rbf_matrix(X_, ls_);
    K.diagonal().array() += noise_ + jitter_;
    return (K * alpha_ - ytilde_).norm();
}

double acquire_lcb(const GpModel& model, const Eigen::VectorXd& x, double kappa) {
    auto [mean, var] = model.posterior(x);
    return mean - kappa * std::sqrt(std::max(var, 0.0));
}

Eigen::VectorXd propose_next(const GpModel& model, double kappa, std::uint64_t seed) {
    const auto d = static_cast<Eigen::Index>(model.dim());
    constexpr int kCandidates = 2048;
    constexpr int kPolish = 8;

    Rsequence seq(static_cast<std::size_t>(d), seed);
    std::vector<std::pair<double, Eigen::VectorXd>> scored;
    scored.reserve(kCandidates);
    for (int c = 0; c < kCandidates; ++c) {
        Eigen::VectorXd x = seq.next();
        scored.emplace_back(acquire_lcb(model, x, kappa), x);
    }
    std::partial_sort(scored.begin(), scored.begin() + kPolish, scored.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });

    Eigen::VectorXd best_x = scored[0].second;
    double best_v = scored[0].first;
    for (int p = 0; p < kPolish; ++p) {
        Eigen::VectorXd x = scored[p].second;
        double v = scored[p].first;
        for (double h = 0.25; h > 1e-4; h *= 0.5) {
            bool improved = true;
            while (improved) {
                improved = false;
                for (Eigen::Index k = 0; k < d; ++k) {
                    for (double sgn : {+1.0, -1.0}) {
                        Eigen::VectorXd trial = x;
                        trial(k) = std::clamp(trial(k) + sgn * h, 0.0, 1.0 - 1e-12);
                        double tv = acquire_lcb(model, trial, kappa);
                        if (tv < v) {
                            v = tv;
                            x = trial;
                            improved = true;
                        }
                    }
                }
            }
        }
        if (v < best_v) {
            best_v = v;
            best_x = x;
        }
    }

    // Keep clear of existing training rows.
    const Eigen::MatrixXd& X = model.train_x();
    Rng rng(mix_seed(seed, 0x70657274ULL));
    for (int guard = 0; guard < 256; ++guard) {
        bool clash = false;
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            if ((X.row(i).transpose() - best_x).norm() < 1e-9) {
                clash = true;
                break;
            }
        }
        if (!clash) break;
        for (Eigen::Index k = 0; k < d; ++k) {
            best_x(k) = std::clamp(best_x(k) + (rng.uniform() - 0.5) * 1e-5, 0.0,
                                   1.0 - 1e-12);
        }
    }
    return best_x;
}

} // namespace anvil
