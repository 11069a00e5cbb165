// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace cortexkit {

/// Indexed triangle surface. Faces are consistently oriented
/// counter-clockwise seen from outside wherever the producer guarantees it
/// (marching cubes does).
struct TriangleMesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> faces;

    int vertex_count() const { return int(vertices.size()); }
    int face_count() const { return int(faces.size()); }
};

double face_area(const TriangleMesh& mesh, int face);
Eigen::Vector3d face_normal(const TriangleMesh& mesh, int face); // unnormalized (2A * n)

/// One third of the incident face areas per vertex.
std::vector<double> vertex_areas(const TriangleMesh& mesh);
double total_area(const TriangleMesh& mesh);

/// Area-weighted, normalized per-vertex normals.
std::vector<Eigen::Vector3d> vertex_normals(const TriangleMesh& mesh);

/// Unique undirected edges (a < b).
std::vector<std::array<int, 2>> unique_edges(const TriangleMesh& mesh);

/// Vertex adjacency as CSR-style offsets/neighbors.
struct VertexAdjacency {
    std::vector<int> offsets;
    std::vector<int> neighbors;
};
VertexAdjacency vertex_adjacency(const TriangleMesh& mesh);

/// Divergence-theorem volume; positive for closed outward-oriented surfaces.
double signed_volume(const TriangleMesh& mesh);

/// Throws MalformedOff-style argument errors if indices are out of range or
/// a face repeats a vertex.
void validate_mesh(const TriangleMesh& mesh);

} // namespace cortexkit
