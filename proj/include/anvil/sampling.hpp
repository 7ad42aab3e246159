#pragma once

#include <cstdint>
#include <vector>

#include "anvil/config.hpp"

namespace anvil {

/// n points in [0,1)^d, row-major. Deterministic in (method, n, d, seed,
/// iters); the generator is std::mt19937_64 with an explicit 53-bit mantissa
/// mapping to [0,1).
struct SamplePlan {
    std::size_t n = 0, d = 0;
    std::vector<double> points; // n * d
    SamplingMethod method = SamplingMethod::UniformRandom;
    std::uint64_t seed = 0;

    double at(std::size_t i, std::size_t j) const { return points[i * d + j]; }
    double& at(std::size_t i, std::size_t j) { return points[i * d + j]; }
};

SamplePlan uniform_random(std::size_t n, std::size_t d, std::uint64_t seed);

/// Latin hypercube at stratum centers, improved by random in-column swaps
/// accepted only when the minimum pairwise distance grows.
SamplePlan lhs_maximin(std::size_t n, std::size_t d, std::uint64_t seed, long iters);

/// Latin hypercube improved by swaps accepted only when the maximum absolute
/// off-diagonal column correlation shrinks.
SamplePlan lhs_mincorr(std::size_t n, std::size_t d, std::uint64_t seed, long iters);

/// Affine map of each row into the parameter ranges; values ordered as the
/// space declares them.
std::vector<std::vector<double>> scale_to_space(const SamplePlan& plan,
                                                const DesignSpaceSpec& space);

/// Objective helpers (exposed for the sampling property tests).
double min_pairwise_distance(const SamplePlan& plan);
double max_abs_correlation(const SamplePlan& plan);
bool is_latin_hypercube(const SamplePlan& plan);

} // namespace anvil
