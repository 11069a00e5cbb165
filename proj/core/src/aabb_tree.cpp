// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "cortexkit/detail/aabb_tree.hpp"

#include <numeric>

namespace cortexkit::detail {

Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
    const Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return a;

    const Eigen::Vector3d bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;

    const Eigen::Vector3d cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

AabbTree::AabbTree(const TriangleMesh& mesh) : mesh_(mesh) {
    const int nf = mesh.face_count();
    faces_.resize(std::size_t(nf));
    std::iota(faces_.begin(), faces_.end(), 0);

    std::vector<Aabb> boxes(static_cast<std::size_t>(nf));
    std::vector<Eigen::Vector3d> centers(static_cast<std::size_t>(nf));
    for (int f = 0; f < nf; ++f) {
        Aabb box;
        Eigen::Vector3d center = Eigen::Vector3d::Zero();
        for (int v : mesh.faces[std::size_t(f)]) {
            box.expand(mesh.vertices[std::size_t(v)]);
            center += mesh.vertices[std::size_t(v)];
        }
        boxes[std::size_t(f)] = box;
        centers[std::size_t(f)] = center / 3.0;
    }
    if (nf > 0) {
        nodes_.reserve(std::size_t(2 * nf));
        build(0, nf, boxes, centers);
    }
}

int AabbTree::build(int first, int count, std::vector<Aabb>& boxes,
                    std::vector<Eigen::Vector3d>& centers) {
    const int node_index = int(nodes_.size());
    nodes_.emplace_back();

    Aabb box;
    for (int i = first; i < first + count; ++i) box.expand(boxes[std::size_t(faces_[std::size_t(i)])]);
    nodes_[std::size_t(node_index)].box = box;

    constexpr int kLeafSize = 8;
    if (count <= kLeafSize) {
        nodes_[std::size_t(node_index)].first = first;
        nodes_[std::size_t(node_index)].count = count;
        return node_index;
    }

    Aabb cbox;
    for (int i = first; i < first + count; ++i)
        cbox.expand(centers[std::size_t(faces_[std::size_t(i)])]);
    int axis = 0;
    const Eigen::Vector3d extent = cbox.hi - cbox.lo;
    if (extent.y() > extent.x()) axis = 1;
    if (extent.z() > extent[axis]) axis = 2;

    const int mid = first + count / 2;
    std::nth_element(faces_.begin() + first, faces_.begin() + mid, faces_.begin() + first + count,
                     [&](int a, int b) {
                         return centers[std::size_t(a)][axis] < centers[std::size_t(b)][axis];
                     });

    const int left = build(first, mid - first, boxes, centers);
    const int right = build(mid, first + count - mid, boxes, centers);
    nodes_[std::size_t(node_index)].left = left;
    nodes_[std::size_t(node_index)].right = right;
    return node_index;
}

AabbTree::Nearest AabbTree::nearest(const Eigen::Vector3d& p) const {
    Nearest best;
    if (nodes_.empty()) return best;
    best.distance = std::numeric_limits<double>::max();

    // depth-first with branch pruning, nearer child first
    std::vector<int> stack{0};
    double best2 = best.distance;
    while (!stack.empty()) {
        const int ni = stack.back();
        stack.pop_back();
        const Node& node = nodes_[std::size_t(ni)];
        if (node.box.distance2(p) > best2) continue;
        if (node.left < 0) {
            for (int i = node.first; i < node.first + node.count; ++i) {
                const int f = faces_[std::size_t(i)];
                const auto& face = mesh_.faces[std::size_t(f)];
                const Eigen::Vector3d q = closest_point_on_triangle(
                    p, mesh_.vertices[std::size_t(face[0])], mesh_.vertices[std::size_t(face[1])],
                    mesh_.vertices[std::size_t(face[2])]);
                const double d2 = (q - p).squaredNorm();
                if (d2 < best2) {
                    best2 = d2;
                    best.point = q;
                    best.face = f;
                }
            }
        } else {
            const double dl = nodes_[std::size_t(node.left)].box.distance2(p);
            const double dr = nodes_[std::size_t(node.right)].box.distance2(p);
            if (dl < dr) {
                if (dr <= best2) stack.push_back(node.right);
                if (dl <= best2) stack.push_back(node.left);
            } else {
                if (dl <= best2) stack.push_back(node.left);
                if (dr <= best2) stack.push_back(node.right);
            }
        }
    }
    best.distance = std::sqrt(best2);
    return best;
}

void AabbTree::collect_overlaps(const Aabb& box, double eps, std::vector<int>& out) const {
    if (nodes_.empty()) return;
    std::vector<int> stack{0};
    while (!stack.empty()) {
        const int ni = stack.back();
        stack.pop_back();
        const Node& node = nodes_[std::size_t(ni)];
        if (!node.box.overlaps(box, eps)) continue;
        if (node.left < 0) {
            for (int i = node.first; i < node.first + node.count; ++i)
                out.push_back(faces_[std::size_t(i)]);
        } else {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
}

} // namespace cortexkit::detail
