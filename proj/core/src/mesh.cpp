// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "cortexkit/mesh.hpp"

#include <algorithm>
#include <map>

#include <Eigen/Geometry>

#include "cortexkit/errors.hpp"

namespace cortexkit {

double face_area(const TriangleMesh& mesh, int face) {
    return 0.5 * face_normal(mesh, face).norm();
}

Eigen::Vector3d face_normal(const TriangleMesh& mesh, int face) {
    const auto& f = mesh.faces[std::size_t(face)];
    const Eigen::Vector3d& a = mesh.vertices[std::size_t(f[0])];
    const Eigen::Vector3d& b = mesh.vertices[std::size_t(f[1])];
    const Eigen::Vector3d& c = mesh.vertices[std::size_t(f[2])];
    return (b - a).cross(c - a);
}

std::vector<double> vertex_areas(const TriangleMesh& mesh) {
    std::vector<double> areas(mesh.vertices.size(), 0.0);
    for (int f = 0; f < mesh.face_count(); ++f) {
        const double third = face_area(mesh, f) / 3.0;
        for (int v : mesh.faces[std::size_t(f)]) areas[std::size_t(v)] += third;
    }
    return areas;
}

double total_area(const TriangleMesh& mesh) {
    double sum = 0.0;
    for (int f = 0; f < mesh.face_count(); ++f) sum += face_area(mesh, f);
    return sum;
}

std::vector<Eigen::Vector3d> vertex_normals(const TriangleMesh& mesh) {
    std::vector<Eigen::Vector3d> normals(mesh.vertices.size(), Eigen::Vector3d::Zero());
    for (int f = 0; f < mesh.face_count(); ++f) {
        const Eigen::Vector3d n = face_normal(mesh, f); // area weighted
        for (int v : mesh.faces[std::size_t(f)]) normals[std::size_t(v)] += n;
    }
    for (auto& n : normals) {
        const double len = n.norm();
        if (len > 0) n /= len;
    }
    return normals;
}

std::vector<std::array<int, 2>> unique_edges(const TriangleMesh& mesh) {
    std::vector<std::array<int, 2>> edges;
    edges.reserve(mesh.faces.size() * 3);
    for (const auto& f : mesh.faces) {
        for (int i = 0; i < 3; ++i) {
            int a = f[std::size_t(i)], b = f[std::size_t((i + 1) % 3)];
            if (a > b) std::swap(a, b);
            edges.push_back({a, b});
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

VertexAdjacency vertex_adjacency(const TriangleMesh& mesh) {
    auto edges = unique_edges(mesh);
    std::vector<int> degree(mesh.vertices.size(), 0);
    for (const auto& e : edges) {
        ++degree[std::size_t(e[0])];
        ++degree[std::size_t(e[1])];
    }
    VertexAdjacency adj;
    adj.offsets.assign(mesh.vertices.size() + 1, 0);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
        adj.offsets[v + 1] = adj.offsets[v] + degree[v];
    adj.neighbors.resize(std::size_t(adj.offsets.back()));
    std::vector<int> cursor(adj.offsets.begin(), adj.offsets.end() - 1);
    for (const auto& e : edges) {
        adj.neighbors[std::size_t(cursor[std::size_t(e[0])]++)] = e[1];
        adj.neighbors[std::size_t(cursor[std::size_t(e[1])]++)] = e[0];
    }
    return adj;
}

double signed_volume(const TriangleMesh& mesh) {
    double six_v = 0.0;
    for (const auto& f : mesh.faces) {
        const Eigen::Vector3d& a = mesh.vertices[std::size_t(f[0])];
        const Eigen::Vector3d& b = mesh.vertices[std::size_t(f[1])];
        const Eigen::Vector3d& c = mesh.vertices[std::size_t(f[2])];
        six_v += a.dot(b.cross(c));
    }
    return six_v / 6.0;
}

void validate_mesh(const TriangleMesh& mesh) {
    const int n = mesh.vertex_count();
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        for (int v : face)
            if (v < 0 || v >= n)
                throw MalformedOff("face " + std::to_string(f) + " references vertex " +
                                   std::to_string(v) + " of " + std::to_string(n));
        if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2])
            throw MalformedOff("face " + std::to_string(f) + " repeats a vertex");
    }
}

} // namespace cortexkit
