#pragma once

#include <memory>
#include <vector>

#include "anvil/geometry.hpp"

namespace anvil {

/// Uniform-grid triangle index over a surface mesh, shared by the castellation
/// classifier and the inside/outside predicate.
class TriQuery {
public:
    explicit TriQuery(const TriMesh& mesh);

    const TriMesh& mesh() const { return *mesh_; }
    const Box& bounds() const { return bounds_; }

    /// Triangle indices whose bounding boxes overlap `box`.
    void candidates(const Box& box, std::vector<std::uint32_t>& out) const;

    /// Any triangle overlapping the axis-aligned box (separating axis test).
    bool intersects_box(const Box& box) const;

    /// Ray-parity classification; requires a watertight mesh. Grazing hits
    /// (edge/vertex contact, near-parallel triangles) trigger a retry with the
    /// next direction from a fixed table, so the result is deterministic.
    bool point_inside(const Vec3& p) const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
    const TriMesh* mesh_;
    Box bounds_;
};

/// Exact separating-axis triangle vs axis-aligned box test.
bool triangle_box_overlap(const Vec3& a, const Vec3& b, const Vec3& c, const Box& box);

} // namespace anvil
