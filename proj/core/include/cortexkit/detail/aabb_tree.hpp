// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "cortexkit/mesh.hpp"

namespace cortexkit::detail {

struct Aabb {
    Eigen::Vector3d lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
                       std::numeric_limits<double>::max()};
    Eigen::Vector3d hi{std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest(),
                       std::numeric_limits<double>::lowest()};

    void expand(const Eigen::Vector3d& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    void expand(const Aabb& b) {
        lo = lo.cwiseMin(b.lo);
        hi = hi.cwiseMax(b.hi);
    }
    bool overlaps(const Aabb& b, double eps) const {
        return (lo.array() <= b.hi.array() + eps).all() &&
               (b.lo.array() <= hi.array() + eps).all();
    }
    double distance2(const Eigen::Vector3d& p) const {
        const Eigen::Vector3d d = (lo - p).cwiseMax(0.0).cwiseMax(p - hi);
        return d.squaredNorm();
    }
};

/// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection).
Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c);

/// Static median-split AABB tree over mesh faces.
class AabbTree {
public:
    explicit AabbTree(const TriangleMesh& mesh);

    struct Nearest {
        double distance = std::numeric_limits<double>::max();
        Eigen::Vector3d point = Eigen::Vector3d::Zero();
        int face = -1;
    };
    Nearest nearest(const Eigen::Vector3d& p) const;

    /// Faces whose inflated box overlaps `box`.
    void collect_overlaps(const Aabb& box, double eps, std::vector<int>& out) const;

private:
    struct Node {
        Aabb box;
        int left = -1, right = -1; // children, or
        int first = 0, count = 0;  // leaf range into faces_
    };

    int build(int first, int count, std::vector<Aabb>& boxes, std::vector<Eigen::Vector3d>& centers);

    const TriangleMesh& mesh_;
    std::vector<int> faces_;
    std::vector<Node> nodes_;
};

} // namespace cortexkit::detail
