#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace anvil {

// ---------------------------------------------------------------------------
// Error handling. Every module throws anvil::Error with a machine-checkable
// code; payload-carrying failures (auto-mesh logs, BO histories) subclass it.
// ---------------------------------------------------------------------------

enum class Err {
    // config
    MalformedJson,
    UnknownKey,
    MissingSection,
    RangeViolation,
    DimensionLimitExceeded,
    UnknownParameter,
    BoundsMismatch,
    OutOfBounds,
    // geometry
    DegenerateProfile,
    ResolutionTooLow,
    SelfIntersection,
    NonPositiveParam,
    // stl
    TruncatedFile,
    FacetCountMismatch,
    UnparsableAscii,
    // meshing
    NonWatertightInput,
    AutoMeshExhausted,
    // solver
    Diverged,
    NotConverged,
    Unstable,
    MissingPatch,
    // external runs
    CommandFailed,
    ResultMissing,
    ParseError,
    Timeout,
    // surrogate
    SingularKernel,
    NonFiniteObjective,
    AllEvaluationsFailed,
    DimensionMismatch,
    // io
    IoFailure,
};

const char* err_name(Err code);

class Error : public std::runtime_error {
public:
    Error(Err code, const std::string& what)
        : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}

    Err code() const { return code_; }

private:
    Err code_;
};

// ---------------------------------------------------------------------------
// Small vector types. Geometry lengths are millimeters unless a name or
// comment says otherwise; the flow solver converts to SI internally.
// ---------------------------------------------------------------------------

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double px, double py, double pz) : x(px), y(py), z(pz) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(const Vec3& v) {
    double n = norm(v);
    return n > 0.0 ? v / n : Vec3{0, 0, 0};
}

struct Int3 {
    int x = 0, y = 0, z = 0;

    bool operator==(const Int3& o) const { return x == o.x && y == o.y && z == o.z; }
    int operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    int& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    long long product() const { return 1LL * x * y * z; }
};

struct Box {
    Vec3 lo, hi;

    Vec3 extent() const { return hi - lo; }
    Vec3 center() const { return (lo + hi) * 0.5; }
    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
               p.z >= lo.z && p.z <= hi.z;
    }
    bool strictly_contains(const Box& inner) const {
        return inner.lo.x > lo.x && inner.lo.y > lo.y && inner.lo.z > lo.z &&
               inner.hi.x < hi.x && inner.hi.y < hi.y && inner.hi.z < hi.z;
    }
    Box expanded(double m) const { return {lo - Vec3{m, m, m}, hi + Vec3{m, m, m}}; }
};

// ---------------------------------------------------------------------------
// Deterministic RNG. std::mt19937_64 has a fully specified stream; the
// uniform mapping below (53-bit mantissa scaling) avoids the
// implementation-defined std::uniform_real_distribution, so identical seeds
// give identical samples on every platform.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [a, b).
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

private:
    std::mt19937_64 gen_;
};

/// splitmix-style mixing for deriving per-task seeds from a run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed ^ (salt * 0x9E3779B97F4A7C15ULL + 0x7F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// FNV-1a 64-bit, used for config hashes in run manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

constexpr double kMmPerM = 1000.0;
constexpr double kMetersPerMile = 1609.344;

} // namespace anvil
