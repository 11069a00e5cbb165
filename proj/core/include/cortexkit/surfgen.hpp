// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "cortexkit/mesh.hpp"
#include "cortexkit/types.hpp"

namespace cortexkit::surfgen {

/// Extract the 0.5 level set of a binary mask as a closed, consistently
/// oriented 2-manifold in the volume's mm frame. The mask is padded
/// internally so surfaces never touch the grid boundary. Vertices get
/// sub-voxel placement (antialiased sampling plus shrink-free smoothing);
/// the topology is exactly that of the raw mask.
TriangleMesh marching_cubes(const BinaryMask& mask);

struct TopologyReport {
    int euler = 0;        // V - E + F over the whole mesh
    int genus = 0;        // sum of per-component genera
    int components = 0;
    int defect_count = 0; // handles/tunnels = total genus
};
/// Requires a closed edge-manifold mesh with consistent orientation;
/// reports the offending edge otherwise.
TopologyReport euler_defects(const TriangleMesh& mesh);

struct MeshQuality {
    std::vector<double> per_face; // Q = 4*sqrt(3)*A / (e1^2+e2^2+e3^2)
    double mean = 0.0;
};
MeshQuality mesh_quality(const TriangleMesh& mesh);

/// Cotangent stiffness (PSD, rows sum to zero) and barycentric lumped mass
/// (one third of incident triangle areas). Negative cotangent weights from
/// obtuse triangles are kept.
struct Laplacian {
    Eigen::SparseMatrix<double> stiffness;
    Eigen::VectorXd lumped_mass;
};
Laplacian cotan_laplacian(const TriangleMesh& mesh);

struct SpectralEmbedding {
    Eigen::Vector3d eigenvalues;     // ascending from the solver
    Eigen::MatrixX3d functions;      // mass-orthonormal, constant mode removed
    bool mass_orthonormal = true;
};

/// First k non-constant generalized eigenpairs of (stiffness, mass), via
/// constant-deflated shift-inverted block subspace iteration. Residual
/// bound ||S f - lambda M f|| <= 1e-8 per pair; iteration cap 10000.
SpectralEmbedding smallest_eigenpairs(const Eigen::SparseMatrix<double>& stiffness,
                                      const Eigen::VectorXd& lumped_mass, int k = 3);

/// Permute/sign-fix the eigenfunctions so f_i correlates positively and
/// maximally with anatomical axis i (mesh x, y, z by default). Fails with
/// DegenerateOrientation when every correlation is below 0.1.
SpectralEmbedding orient_eigenfunctions(const SpectralEmbedding& emb,
                                        const std::vector<Eigen::Vector3d>& vertices);

/// Scale each vertex's (f1,f2,f3) to unit length; connectivity unchanged.
TriangleMesh spectral_sphere_map(const TriangleMesh& mesh, const SpectralEmbedding& oriented);

struct SelfIntersections {
    int count = 0;
    std::vector<std::array<int, 2>> pairs; // offending non-adjacent face pairs
};
/// Counts non-adjacent (no shared vertex) intersecting triangle pairs,
/// BVH-accelerated, tolerance 1e-9 mm.
SelfIntersections self_intersections(const TriangleMesh& mesh);

/// Exact predicate shared by the BVH path and test oracles.
bool triangles_intersect(const Eigen::Vector3d& a0, const Eigen::Vector3d& a1,
                         const Eigen::Vector3d& a2, const Eigen::Vector3d& b0,
                         const Eigen::Vector3d& b1, const Eigen::Vector3d& b2,
                         double eps = 1e-9);

/// Mean |log edge-length ratio| between a mesh and its sphere map after
/// global scale normalization; 0 iff the map is a similarity on edges.
double metric_distortion(const TriangleMesh& mesh, const TriangleMesh& sphere_map);

} // namespace cortexkit::surfgen
