#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "anvil/gp.hpp"

using namespace anvil;

namespace {

/// Dense-matrix posterior oracle: builds the same kernel matrix, inverts it
/// with hand-rolled Gauss-Jordan elimination (no Eigen solve paths), and
/// applies the textbook mean/variance formulas.
struct DenseOracle {
    Eigen::MatrixXd X;
    std::vector<double> y;
    Eigen::VectorXd ls;
    double sv, noise, jitter;
    double ymean = 0.0, ystd = 1.0;
    std::vector<std::vector<double>> Kinv;

    DenseOracle(const Dataset& data, const GpModel& model)
        : X(data.X), ls(model.lengthscales()), sv(model.signal_variance_standardized()),
          noise(model.noise_variance_standardized()), jitter(model.jitter()) {
        const auto n = X.rows();
        ymean = model.y_mean();
        ystd = model.y_std();
        for (Eigen::Index i = 0; i < n; ++i) y.push_back((data.y(i) - ymean) / ystd);

        std::vector<std::vector<double>> K(n, std::vector<double>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j2 = 0; j2 < n; ++j2) {
                K[i][j2] = kernel(X.row(i), X.row(j2));
                if (i == j2) K[i][j2] += noise + jitter;
            }
        }
        Kinv = invert(K);
    }

    double kernel(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) const {
        double s = 0.0;
        for (Eigen::Index k = 0; k < a.size(); ++k) {
            double d = (a(k) - b(k)) / ls(k);
            s += d * d;
        }
        return sv * std::exp(-0.5 * s);
    }

    static std::vector<std::vector<double>> invert(std::vector<std::vector<double>> a) {
        const std::size_t n = a.size();
        std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
        for (std::size_t col = 0; col < n; ++col) {
            std::size_t pivot = col;
            for (std::size_t r = col + 1; r < n; ++r) {
                if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
            }
            std::swap(a[pivot], a[col]);
            std::swap(inv[pivot], inv[col]);
            double p = a[col][col];
            for (std::size_t c = 0; c < n; ++c) {
                a[col][c] /= p;
                inv[col][c] /= p;
            }
            for (std::size_t r = 0; r < n; ++r) {
                if (r == col) continue;
                double f = a[r][col];
                for (std::size_t c = 0; c < n; ++c) {
                    a[r][c] -= f * a[col][c];
                    inv[r][c] -= f * inv[col][c];
                }
            }
        }
        return inv;
    }

    std::pair<double, double> posterior(const Eigen::VectorXd& x) const {
        const std::size_t n = y.size();
        std::vector<double> kstar(n);
        for (std::size_t i = 0; i < n; ++i) {
            kstar[i] = kernel(X.row(static_cast<Eigen::Index>(i)), x.transpose());
        }
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double w = 0.0;
            for (std::size_t j2 = 0; j2 < n; ++j2) w += Kinv[i][j2] * y[j2];
            mean += kstar[i] * w;
        }
        double var = sv;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j2 = 0; j2 < n; ++j2) {
                var -= kstar[i] * Kinv[i][j2] * kstar[j2];
            }
        }
        return {ymean + ystd * mean, ystd * ystd * std::max(var, 0.0)};
    }
};

Dataset make_dataset(const std::vector<std::vector<double>>& xs,
                     const std::vector<double>& ys) {
    Dataset d;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        Eigen::VectorXd x(xs[i].size());
        for (std::size_t j = 0; j < xs[i].size(); ++j) x(j) = xs[i][j];
        d.add(x, ys[i]);
    }
    return d;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double c : v) x(i++) = c;
    return x;
}

} // namespace

TEST_CASE("constant targets drive the signal variance to its lower bound") {
    Dataset d = make_dataset({{0.1}, {0.3}, {0.5}, {0.7}, {0.9}},
                             {2.5, 2.5, 2.5, 2.5, 2.5});
    GpFitOptions opts;
    opts.fixed_noise = 1e-6;
    GpModel m = GpModel::fit(d, opts);
    CHECK(m.signal_variance_standardized() == doctest::Approx(opts.bounds.sv_min));
    for (double x : {0.05, 0.4, 0.66, 0.95}) {
        auto [mean, var] = m.posterior(vec({x}));
        CHECK(std::abs(mean - 2.5) < 1e-6);
        (void)var;
    }
}

TEST_CASE("two distant points are interpolated exactly at zero noise") {
    Dataset d = make_dataset({{0.1}, {0.9}}, {1.0, 3.0});
    GpFitOptions opts;
    opts.fixed_noise = 0.0;
    GpModel m = GpModel::fit(d, opts);
    auto [m0, v0] = m.posterior(vec({0.1}));
    auto [m1, v1] = m.posterior(vec({0.9}));
    CHECK(std::abs(m0 - 1.0) < 1e-8);
    CHECK(std::abs(m1 - 3.0) < 1e-8);
    CHECK(v0 >= 0.0);
    CHECK(v1 >= 0.0);
}

TEST_CASE("noiseless interpolation holds at every training point") {
    Dataset d = make_dataset(
        {{0.1, 0.2}, {0.8, 0.3}, {0.4, 0.9}, {0.6, 0.6}, {0.2, 0.75}, {0.95, 0.85}},
        {1.0, 2.0, 0.5, 1.7, 0.9, 2.4});
    GpFitOptions opts;
    opts.fixed_noise = 0.0;
    GpModel m = GpModel::fit(d, opts);
    for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
        auto [mean, var] = m.posterior(d.X.row(i).transpose());
        CHECK(std::abs(mean - d.y(i)) < 1e-8);
        CHECK(var <= 1e-8 * m.signal_variance() + 1e-10);
    }
    CHECK(m.factorization_residual() < 1e-8 * std::sqrt(static_cast<double>(d.size())));
}

TEST_CASE("far from the data the posterior reverts to the prior") {
    Dataset d = make_dataset({{0.48, 0.5}, {0.5, 0.52}, {0.52, 0.48}}, {1.0, 1.2, 0.8});
    GpFitOptions opts;
    opts.fixed_noise = 1e-6;
    GpModel m = GpModel::fit(d, opts);
    // 40 lengthscales away along the diagonal (clamped coordinates are fine;
    // use a point far outside the cube).
    double far = 0.5 + 40.0 * m.lengthscales().maxCoeff();
    auto [mean, var] = m.posterior(vec({far, far}));
    CHECK(std::abs(var - m.signal_variance()) < 0.01 * m.signal_variance());
    double ymean = (1.0 + 1.2 + 0.8) / 3.0;
    CHECK(std::abs(mean - ymean) < 1e-6);
}

TEST_CASE("posterior matches the dense Gauss-Jordan oracle within 1e-10") {
    SUBCASE("n=3, d=1") {
        Dataset d = make_dataset({{0.2}, {0.5}, {0.8}}, {1.0, -0.5, 2.0});
        GpFitOptions opts;
        opts.fixed_noise = 1e-4;
        GpModel m = GpModel::fit(d, opts);
        DenseOracle oracle(d, m);
        for (double x : {0.0, 0.21, 0.37, 0.5, 0.66, 0.99}) {
            auto [mean, var] = m.posterior(vec({x}));
            auto [om, ov] = oracle.posterior(vec({x}));
            CHECK(std::abs(mean - om) < 1e-10);
            CHECK(std::abs(var - ov) < 1e-10);
        }
    }
    SUBCASE("n=10, d=3, random") {
        Rng rng(17);
        std::vector<std::vector<double>> xs;
        std::vector<double> ys;
        for (int i = 0; i < 10; ++i) {
            xs.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
            ys.push_back(std::sin(3.0 * xs.back()[0]) + xs.back()[1] - xs.back()[2]);
        }
        Dataset d = make_dataset(xs, ys);
        GpFitOptions opts;
        opts.fixed_noise = 1e-3;
        opts.bounds.sv_max = 10.0; // keeps the kernel conditioning sane so the
        opts.bounds.ls_max = 3.0;  // two algebraic routes agree to 1e-10
        GpModel m = GpModel::fit(d, opts);
        DenseOracle oracle(d, m);
        for (int t = 0; t < 50; ++t) {
            Eigen::VectorXd x = vec({rng.uniform(), rng.uniform(), rng.uniform()});
            auto [mean, var] = m.posterior(x);
            auto [om, ov] = oracle.posterior(x);
            CHECK(std::abs(mean - om) < 1e-10);
            CHECK(std::abs(var - ov) < 1e-10);
        }
    }
}

TEST_CASE("fitted likelihood beats 100 random hyperparameter draws") {
    Rng rng(55);
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    for (int i = 0; i < 14; ++i) {
        xs.push_back({rng.uniform(), rng.uniform()});
        ys.push_back(2.0 * xs.back()[0] + std::cos(5.0 * xs.back()[1]));
    }
    Dataset d = make_dataset(xs, ys);
    GpFitOptions opts;
    opts.fixed_noise = 1e-4;
    opts.seed = 3;
    GpModel m = GpModel::fit(d, opts);
    double fitted = m.log_marginal();

    const GpHyperBounds& b = opts.bounds;
    for (int t = 0; t < 100; ++t) {
        Eigen::VectorXd ls(2);
        for (int k = 0; k < 2; ++k) {
            ls(k) = std::exp(rng.uniform(std::log(b.ls_min), std::log(b.ls_max)));
        }
        double sv = std::exp(rng.uniform(std::log(b.sv_min), std::log(b.sv_max)));
        double draw = GpModel::log_marginal_at(d, ls, sv, 1e-4, m.jitter());
        CHECK(fitted >= draw - 1e-9);
    }
}

TEST_CASE("duplicate rows raise SingularKernel") {
    Dataset d;
    d.add(vec({0.5, 0.5}), 1.0);
    try {
        d.add(vec({0.5, 0.5}), 2.0);
        FAIL("expected SingularKernel");
    } catch (const Error& e) {
        CHECK(e.code() == Err::SingularKernel);
    }
}

TEST_CASE("non-finite targets are rejected") {
    Dataset d;
    try {
        d.add(vec({0.5}), std::numeric_limits<double>::quiet_NaN());
        FAIL("expected NonFiniteObjective");
    } catch (const Error& e) {
        CHECK(e.code() == Err::NonFiniteObjective);
    }
}

TEST_CASE("LCB arithmetic") {
    Dataset d = make_dataset({{0.2}, {0.8}}, {1.0, 2.0});
    GpFitOptions opts;
    opts.fixed_noise = 1e-6;
    GpModel m = GpModel::fit(d, opts);

    SUBCASE("definition: mean - kappa * sigma") {
        for (double x : {0.1, 0.5, 0.9}) {
            auto [mean, var] = m.posterior(vec({x}));
            // worked instance: mean 1, var 4, kappa 2 -> -3
            CHECK(1.0 - 2.0 * std::sqrt(4.0) == doctest::Approx(-3.0));
            CHECK(acquire_lcb(m, vec({x}), 2.0) ==
                  doctest::Approx(mean - 2.0 * std::sqrt(var)));
        }
    }
    SUBCASE("kappa 0 is the pure posterior mean") {
        auto [mean, var] = m.posterior(vec({0.47}));
        (void)var;
        CHECK(acquire_lcb(m, vec({0.47}), 0.0) == doctest::Approx(mean));
    }
    SUBCASE("LCB strictly decreases in kappa where variance is positive") {
        auto [mean, var] = m.posterior(vec({0.5}));
        (void)mean;
        REQUIRE(var > 0.0);
        double prev = acquire_lcb(m, vec({0.5}), 0.0);
        for (double kappa : {0.5, 1.0, 2.0, 4.0}) {
            double v = acquire_lcb(m, vec({0.5}), kappa);
            CHECK(v < prev);
            prev = v;
        }
    }
}

TEST_CASE("proposals explore with a lone training point and a large kappa") {
    Dataset d = make_dataset({{0.5, 0.5}}, {1.0});
    GpModel m = GpModel::fit(d, GpFitOptions{});
    Eigen::VectorXd x = propose_next(m, 5.0, 11);
    double dist = (x - vec({0.5, 0.5})).norm();
    // median distance of uniform candidates from the centre in 2d is ~0.38;
    // a variance-seeking proposal must beat it
    CHECK(dist > 0.38);
}

TEST_CASE("kappa=0 proposal lands on the grid-evaluated LCB minimum") {
    Rng rng(23);
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    auto f = [](double a, double b) {
        return (a - 0.6) * (a - 0.6) + 0.5 * (b - 0.4) * (b - 0.4);
    };
    for (int i = 0; i < 30; ++i) {
        double a = rng.uniform(), b = rng.uniform();
        xs.push_back({a, b});
        ys.push_back(f(a, b));
    }
    Dataset d = make_dataset(xs, ys);
    GpFitOptions opts;
    opts.fixed_noise = 1e-6;
    GpModel m = GpModel::fit(d, opts);

    Eigen::VectorXd proposal = propose_next(m, 0.0, 77);

    // Grid oracle at 1e-3 resolution.
    double best_val = 1e300;
    Eigen::Vector2d best_x;
    for (int i = 0; i <= 1000; ++i) {
        for (int j = 0; j <= 1000; ++j) {
            Eigen::VectorXd x = vec({i / 1000.0, j / 1000.0});
            double v = acquire_lcb(m, x, 0.0);
            if (v < best_val) {
                best_val = v;
                best_x = x;
            }
        }
    }
    double got = acquire_lcb(m, proposal, 0.0);
    CHECK((proposal - best_x).norm() <= 2e-3); // within grid resolution
    CHECK(got <= best_val + 1e-9);
}

TEST_CASE("proposals are deterministic and avoid training rows") {
    Dataset d = make_dataset({{0.25, 0.75}, {0.75, 0.25}, {0.5, 0.5}}, {1.0, 2.0, 1.5});
    GpModel m = GpModel::fit(d, GpFitOptions{});
    Eigen::VectorXd a = propose_next(m, 2.0, 42);
    Eigen::VectorXd b = propose_next(m, 2.0, 42);
    CHECK((a - b).norm() == 0.0);
    for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
        CHECK((d.X.row(i).transpose() - a).norm() >= 1e-9);
    }
}

TEST_CASE("n=1 datasets fall back to prior defaults") {
    Dataset d = make_dataset({{0.3, 0.3, 0.3}}, {5.0});
    GpModel m = GpModel::fit(d, GpFitOptions{});
    auto [mean, var] = m.posterior(vec({0.3, 0.3, 0.3}));
    CHECK(std::abs(mean - 5.0) < 1e-6);
    CHECK(var >= 0.0);
}

TEST_CASE("variance clamp events are counted, not silently eaten") {
    Dataset d = make_dataset({{0.5}, {0.5 + 2e-7}}, {1.0, 1.0 + 1e-9});
    GpFitOptions opts;
    opts.fixed_noise = 0.0;
    GpModel m = GpModel::fit(d, opts);
    for (int i = 0; i < 1000; ++i) {
        (void)m.posterior(vec({0.5 + i * 1e-9}));
    }
    CHECK(m.clamp_events() >= 0); // counter exists and never goes negative
    auto [mean, var] = m.posterior(vec({0.5}));
    (void)mean;
    CHECK(var >= 0.0); // clamped, never negative
}

TEST_CASE("variance clamping stays rare on random models") {
    Rng rng(31);
    long clamps = 0, queries = 0;
    for (int model_i = 0; model_i < 5; ++model_i) {
        Dataset d;
        for (int i = 0; i < 12; ++i) {
            Eigen::VectorXd x(3);
            x << rng.uniform(), rng.uniform(), rng.uniform();
            d.add(x, std::sin(5.0 * x(0)) + x(1) * x(2));
        }
        GpFitOptions opts;
        opts.fixed_noise = 1e-6;
        opts.seed = model_i;
        GpModel m = GpModel::fit(d, opts);
        for (int q = 0; q < 2000; ++q) {
            auto [mean, var] = m.posterior(vec({rng.uniform(), rng.uniform(), rng.uniform()}));
            (void)mean;
            CHECK(var >= 0.0);
            ++queries;
        }
        clamps += m.clamp_events();
    }
    CHECK(static_cast<double>(clamps) < 0.001 * static_cast<double>(queries));
}
