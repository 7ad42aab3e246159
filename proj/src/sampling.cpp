#include "anvil/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace anvil {

namespace {

constexpr std::size_t kMaxDim = 20;

void check_dims(std::size_t n, std::size_t d) {
    if (n < 1) {
        throw Error(Err::RangeViolation, "sample count must be >= 1");
    }
    if (d < 1 || d > kMaxDim) {
        throw Error(Err::DimensionLimitExceeded,
                    "dimension " + std::to_string(d) + " outside [1, 20]");
    }
}

/// Base LHS: per-column random permutation of stratum centers (i + 1/2)/n.
SamplePlan lhs_base(std::size_t n, std::size_t d, Rng& rng) {
    SamplePlan plan;
    plan.n = n;
    plan.d = d;
    plan.points.resize(n * d);
    std::vector<std::size_t> perm(n);
    for (std::size_t j = 0; j < d; ++j) {
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n; i > 1; --i) {
            std::size_t k = rng.below(i);
            std::swap(perm[i - 1], perm[k]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            plan.at(i, j) = (static_cast<double>(perm[i]) + 0.5) / static_cast<double>(n);
        }
    }
    return plan;
}

} // namespace

namespace {

struct DistanceScore {
    double min_sq = std::numeric_limits<double>::infinity();
    double phi = 0.0; // sum of (d^2)^-8; smaller spreads points more evenly
    std::size_t arg_i = 0, arg_k = 1;
};

DistanceScore distance_score(const SamplePlan& plan) {
    DistanceScore s;
    for (std::size_t i = 0; i < plan.n; ++i) {
        for (std::size_t k = i + 1; k < plan.n; ++k) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < plan.d; ++j) {
                double dj = plan.at(i, j) - plan.at(k, j);
                d2 += dj * dj;
            }
            if (d2 < s.min_sq) {
                s.min_sq = d2;
                s.arg_i = i;
                s.arg_k = k;
            }
            double q = d2 * d2;     // d^4
            q = q * q;              // d^8
            s.phi += 1.0 / (q * q); // d^-16
        }
    }
    return s;
}

} // namespace

double min_pairwise_distance(const SamplePlan& plan) {
    return std::sqrt(distance_score(plan).min_sq);
}

double max_abs_correlation(const SamplePlan& plan) {
    if (plan.d < 2) return 0.0;
    std::size_t n = plan.n, d = plan.d;
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < n; ++i) mean[j] += plan.at(i, j);
        mean[j] /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            double c = plan.at(i, j) - mean[j];
            var[j] += c * c;
        }
    }
    double worst = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a + 1; b < d; ++b) {
            double cov = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                cov += (plan.at(i, a) - mean[a]) * (plan.at(i, b) - mean[b]);
            }
            double denom = std::sqrt(var[a] * var[b]);
            if (denom > 0.0) worst = std::max(worst, std::abs(cov / denom));
        }
    }
    return worst;
}

bool is_latin_hypercube(const SamplePlan& plan) {
    std::vector<char> seen(plan.n);
    for (std::size_t j = 0; j < plan.d; ++j) {
        std::fill(seen.begin(), seen.end(), 0);
        for (std::size_t i = 0; i < plan.n; ++i) {
            double v = plan.at(i, j);
            if (v < 0.0 || v >= 1.0) return false;
            auto stratum = static_cast<std::size_t>(v * static_cast<double>(plan.n));
            if (stratum >= plan.n || seen[stratum]) return false;
            seen[stratum] = 1;
        }
    }
    return true;
}

SamplePlan uniform_random(std::size_t n, std::size_t d, std::uint64_t seed) {
    check_dims(n, d);
    Rng rng(seed);
    SamplePlan plan;
    plan.n = n;
    plan.d = d;
    plan.seed = seed;
    plan.method = SamplingMethod::UniformRandom;
    plan.points.resize(n * d);
    for (double& v : plan.points) v = rng.uniform();
    return plan;
}

SamplePlan lhs_maximin(std::size_t n, std::size_t d, std::uint64_t seed, long iters) {
    check_dims(n, d);
    if (iters < 1) {
        throw Error(Err::RangeViolation, "iters must be >= 1");
    }
    Rng rng(seed);
    SamplePlan plan = lhs_base(n, d, rng);
    plan.seed = seed;
    plan.method = SamplingMethod::LhsMaximin;
    if (n < 2) return plan;
    DistanceScore best = distance_score(plan);
    for (long it = 0; it < iters; ++it) {
        std::size_t j = rng.below(d);
        // Bias one swap endpoint toward the current bottleneck pair; swaps
        // elsewhere cannot raise the minimum.
        std::size_t a = (rng.next_u64() & 1) ? best.arg_i : best.arg_k;
        std::size_t b = rng.below(n);
        if (a == b) continue;
        std::swap(plan.at(a, j), plan.at(b, j));
        DistanceScore now = distance_score(plan);
        // Lexicographic acceptance: the minimum distance may never shrink;
        // ties are broken by the spread criterion so plateaus (several pairs
        // at the same minimum) can still be escaped.
        bool accept = now.min_sq > best.min_sq ||
                      (now.min_sq == best.min_sq && now.phi < best.phi);
        if (accept) {
            best = now;
        } else {
            std::swap(plan.at(a, j), plan.at(b, j)); // reject
        }
    }
    return plan;
}

SamplePlan lhs_mincorr(std::size_t n, std::size_t d, std::uint64_t seed, long iters) {
    check_dims(n, d);
    if (iters < 1) {
        throw Error(Err::RangeViolation, "iters must be >= 1");
    }
    Rng rng(seed);
    SamplePlan plan = lhs_base(n, d, rng);
    plan.seed = seed;
    plan.method = SamplingMethod::LhsMinCorr;
    if (d < 2 || n < 3) return plan; // objective vacuous
    double best = max_abs_correlation(plan);
    for (long it = 0; it < iters; ++it) {
        std::size_t j = rng.below(d);
        std::size_t a = rng.below(n);
        std::size_t b = rng.below(n);
        if (a == b) continue;
        std::swap(plan.at(a, j), plan.at(b, j));
        double now = max_abs_correlation(plan);
        if (now < best) {
            best = now;
        } else {
            std::swap(plan.at(a, j), plan.at(b, j));
        }
    }
    return plan;
}

std::vector<std::vector<double>> scale_to_space(const SamplePlan& plan,
                                                const DesignSpaceSpec& space) {
    if (plan.d != static_cast<std::size_t>(space.dimension())) {
        throw Error(Err::DimensionMismatch,
                    "plan dimension " + std::to_string(plan.d) + " vs space dimension " +
                        std::to_string(space.dimension()));
    }
    std::vector<std::vector<double>> rows(plan.n);
    for (std::size_t i = 0; i < plan.n; ++i) {
        rows[i].resize(plan.d);
        for (std::size_t j = 0; j < plan.d; ++j) {
            const DesignParameter& p = space.parameters[j];
            rows[i][j] = p.min_mm + (p.max_mm - p.min_mm) * plan.at(i, j);
        }
    }
    return rows;
}

} // namespace anvil
