// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "cortexkit/surfgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "cortexkit/detail/aabb_tree.hpp"
#include "cortexkit/log.hpp"

namespace cortexkit::surfgen {

// ---------------------------------------------------------------------------
// Marching cubes on the Kuhn (6-tetrahedra) decomposition of each cell. The
// surface is the 0.5 level set of the piecewise-linear interpolant of the
// binary samples at voxel centers; a regular level set of a PL function is
// always a closed 2-manifold, which is what makes the output watertight by
// construction. The decomposition is face-consistent across cells because
// every cube uses the main diagonal of the same orientation.
// ---------------------------------------------------------------------------

namespace {

// tetrahedra as corner indices (bit0 = x, bit1 = y, bit2 = z), each
// containing the 0-7 diagonal
constexpr int kTets[6][4] = {
    {0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7}, {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7},
};

// Taubin lambda/mu passes: removes the half-voxel staircase of the binary
// level set without shrinking. Connectivity is untouched, so the closed-
// manifold guarantee survives. Vertices of a flat axis-aligned sheet stay
// exactly in their plane (their one-ring average is coplanar).
void taubin_smooth(TriangleMesh& mesh, int iterations) {
    constexpr double kLambda = 0.5, kMu = -0.53;
    const auto adjacency = vertex_adjacency(mesh);
    std::vector<Eigen::Vector3d> next(mesh.vertices.size());
    auto pass = [&](double factor) {
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
            const int begin = adjacency.offsets[v], end = adjacency.offsets[v + 1];
            if (begin == end) {
                next[v] = mesh.vertices[v];
                continue;
            }
            Eigen::Vector3d mean = Eigen::Vector3d::Zero();
            for (int i = begin; i < end; ++i)
                mean += mesh.vertices[std::size_t(adjacency.neighbors[std::size_t(i)])];
            mean /= double(end - begin);
            next[v] = mesh.vertices[v] + factor * (mean - mesh.vertices[v]);
        }
        mesh.vertices.swap(next);
    };
    for (int it = 0; it < iterations; ++it) {
        pass(kLambda);
        pass(kMu);
    }
}

struct LatticeIndexer {
    int nx, ny, nz; // voxel counts
    // lattice points run over [-1 .. n] in each axis
    std::uint64_t pid(int i, int j, int k) const {
        return std::uint64_t(i + 1) +
               std::uint64_t(nx + 2) * (std::uint64_t(j + 1) + std::uint64_t(ny + 2) * std::uint64_t(k + 1));
    }
};

} // namespace

TriangleMesh marching_cubes(const BinaryMask& mask) {
    const int nx = int(mask.header.dims[0]), ny = int(mask.header.dims[1]),
              nz = int(mask.header.dims[2]);
    const double sx = mask.header.voxel_size_mm[0], sy = mask.header.voxel_size_mm[1],
                 sz = mask.header.voxel_size_mm[2];

    bool any = false;
    for (auto v : mask.values)
        if (v) {
            any = true;
            break;
        }
    if (!any) throw EmptyMask("marching_cubes: mask has no set voxels");

    const LatticeIndexer lat{nx, ny, nz};
    auto raw = [&](int i, int j, int k) {
        return mask.in_bounds(i, j, k) && mask.at(i, j, k) != 0 ? 1.0 : 0.0;
    };
    // Center-dominant face-neighbor antialiasing. An inside sample stays
    // >= 6.5/12.5 and an outside one <= 6/12.5, so the in/out pattern (and
    // with it the extracted topology) is exactly that of the raw mask; only
    // the crossing positions gain sub-voxel accuracy.
    auto field = [&](int i, int j, int k) {
        const double sum = raw(i - 1, j, k) + raw(i + 1, j, k) + raw(i, j - 1, k) +
                           raw(i, j + 1, k) + raw(i, j, k - 1) + raw(i, j, k + 1);
        return (6.5 * raw(i, j, k) + sum) / 12.5;
    };
    auto point_mm = [&](int i, int j, int k) {
        return Eigen::Vector3d((i + 0.5) * sx, (j + 0.5) * sy, (k + 0.5) * sz);
    };

    TriangleMesh mesh;
    std::unordered_map<std::uint64_t, int> edge_vertex;
    edge_vertex.reserve(std::size_t(nx) * std::size_t(ny) * 8);

    struct Corner {
        int i, j, k;
        std::uint64_t pid;
        bool in;
        double f;
        Eigen::Vector3d p;
    };

    auto vertex_on_edge = [&](const Corner& a, const Corner& b) {
        std::uint64_t lo = a.pid, hi = b.pid;
        if (lo > hi) std::swap(lo, hi);
        const std::uint64_t key = lo * 0x100000000ull ^ hi;
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        const int idx = mesh.vertex_count();
        const double t = (0.5 - a.f) / (b.f - a.f);
        mesh.vertices.emplace_back(a.p + t * (b.p - a.p));
        edge_vertex.emplace(key, idx);
        return idx;
    };

    auto emit = [&](int v0, int v1, int v2, const Eigen::Vector3d& outward) {
        const Eigen::Vector3d& p0 = mesh.vertices[std::size_t(v0)];
        const Eigen::Vector3d n = (mesh.vertices[std::size_t(v1)] - p0)
                                      .cross(mesh.vertices[std::size_t(v2)] - p0);
        if (n.dot(outward) >= 0)
            mesh.faces.push_back({v0, v1, v2});
        else
            mesh.faces.push_back({v0, v2, v1});
    };

    Corner corners[8];
    for (int ck = -1; ck < nz; ++ck)
        for (int cj = -1; cj < ny; ++cj)
            for (int ci = -1; ci < nx; ++ci) {
                int in_count = 0;
                for (int b = 0; b < 8; ++b) {
                    const int i = ci + (b & 1), j = cj + ((b >> 1) & 1), k = ck + ((b >> 2) & 1);
                    const bool in = raw(i, j, k) != 0.0;
                    corners[b] = {i, j, k, lat.pid(i, j, k), in, 0.0, point_mm(i, j, k)};
                    in_count += in;
                }
                if (in_count == 0 || in_count == 8) continue;
                for (auto& corner : corners) corner.f = field(corner.i, corner.j, corner.k);

                for (const auto& tet : kTets) {
                    const Corner* t[4] = {&corners[tet[0]], &corners[tet[1]], &corners[tet[2]],
                                          &corners[tet[3]]};
                    int ins[4], outs[4], ni = 0, no = 0;
                    for (int v = 0; v < 4; ++v)
                        (t[v]->in ? ins[ni++] : outs[no++]) = v;
                    if (ni == 0 || ni == 4) continue;

                    Eigen::Vector3d cin = Eigen::Vector3d::Zero(), cout = Eigen::Vector3d::Zero();
                    for (int v = 0; v < ni; ++v) cin += t[ins[v]]->p;
                    for (int v = 0; v < no; ++v) cout += t[outs[v]]->p;
                    const Eigen::Vector3d outward = cout / no - cin / ni;

                    if (ni == 1) {
                        const Corner& a = *t[ins[0]];
                        emit(vertex_on_edge(a, *t[outs[0]]), vertex_on_edge(a, *t[outs[1]]),
                             vertex_on_edge(a, *t[outs[2]]), outward);
                    } else if (ni == 3) {
                        const Corner& d = *t[outs[0]];
                        emit(vertex_on_edge(d, *t[ins[0]]), vertex_on_edge(d, *t[ins[1]]),
                             vertex_on_edge(d, *t[ins[2]]), outward);
                    } else { // 2 in, 2 out: planar quad across the tet
                        const Corner &a = *t[ins[0]], &b = *t[ins[1]];
                        const Corner &c = *t[outs[0]], &d = *t[outs[1]];
                        const int q0 = vertex_on_edge(a, c), q1 = vertex_on_edge(a, d),
                                  q2 = vertex_on_edge(b, d), q3 = vertex_on_edge(b, c);
                        emit(q0, q1, q2, outward);
                        emit(q0, q2, q3, outward);
                    }
                }
            }
    taubin_smooth(mesh, 25);
    return mesh;
}

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

namespace {

struct EdgeKey {
    static std::uint64_t make(int a, int b) {
        return (std::uint64_t(std::uint32_t(a)) << 32) | std::uint32_t(b);
    }
};

} // namespace

TopologyReport euler_defects(const TriangleMesh& mesh) {
    validate_mesh(mesh);

    // closed + consistently oriented <=> every directed edge appears exactly
    // once and so does its reverse
    std::unordered_map<std::uint64_t, int> directed;
    directed.reserve(mesh.faces.size() * 3);
    for (const auto& f : mesh.faces)
        for (int e = 0; e < 3; ++e) {
            const int a = f[std::size_t(e)], b = f[std::size_t((e + 1) % 3)];
            if (++directed[EdgeKey::make(a, b)] > 1)
                throw NonManifold("edge " + std::to_string(a) + "->" + std::to_string(b) +
                                  " repeats; orientation inconsistent or non-manifold");
        }
    for (const auto& [key, count] : directed) {
        const int a = int(key >> 32), b = int(key & 0xffffffffu);
        if (directed.find(EdgeKey::make(b, a)) == directed.end())
            throw NonManifold("edge " + std::to_string(a) + "-" + std::to_string(b) +
                              " is a boundary edge; mesh not closed");
    }

    // face components via shared undirected edges
    std::unordered_map<std::uint64_t, std::array<int, 2>> edge_faces;
    edge_faces.reserve(mesh.faces.size() * 2);
    for (int fi = 0; fi < mesh.face_count(); ++fi) {
        const auto& f = mesh.faces[std::size_t(fi)];
        for (int e = 0; e < 3; ++e) {
            int a = f[std::size_t(e)], b = f[std::size_t((e + 1) % 3)];
            if (a > b) std::swap(a, b);
            auto [it, fresh] = edge_faces.try_emplace(EdgeKey::make(a, b), std::array<int, 2>{-1, -1});
            if (fresh)
                it->second[0] = fi;
            else
                it->second[1] = fi;
        }
    }

    std::vector<std::vector<int>> face_adj(mesh.faces.size());
    for (const auto& [key, pair] : edge_faces) {
        face_adj[std::size_t(pair[0])].push_back(pair[1]);
        face_adj[std::size_t(pair[1])].push_back(pair[0]);
    }

    TopologyReport report;
    std::vector<int> comp_of(mesh.faces.size(), -1);
    for (int seed = 0; seed < mesh.face_count(); ++seed) {
        if (comp_of[std::size_t(seed)] >= 0) continue;
        const int comp = report.components++;
        std::vector<int> stack{seed};
        comp_of[std::size_t(seed)] = comp;
        while (!stack.empty()) {
            const int f = stack.back();
            stack.pop_back();
            for (int g : face_adj[std::size_t(f)])
                if (comp_of[std::size_t(g)] < 0) {
                    comp_of[std::size_t(g)] = comp;
                    stack.push_back(g);
                }
        }
    }

    std::vector<int> faces_per(std::size_t(report.components), 0);
    std::vector<int> edges_per(std::size_t(report.components), 0);
    std::vector<std::unordered_map<int, bool>> seen_vertices(std::size_t(report.components));
    for (int fi = 0; fi < mesh.face_count(); ++fi) {
        const int c = comp_of[std::size_t(fi)];
        ++faces_per[std::size_t(c)];
        for (int v : mesh.faces[std::size_t(fi)]) seen_vertices[std::size_t(c)][v] = true;
    }
    for (const auto& [key, pair] : edge_faces) ++edges_per[std::size_t(comp_of[std::size_t(pair[0])])];

    for (int c = 0; c < report.components; ++c) {
        const int chi = int(seen_vertices[std::size_t(c)].size()) - edges_per[std::size_t(c)] +
                        faces_per[std::size_t(c)];
        if ((2 - chi) % 2 != 0)
            throw NonManifold("component " + std::to_string(c) + " has odd Euler characteristic " +
                              std::to_string(chi));
        report.euler += chi;
        report.genus += (2 - chi) / 2;
    }
    report.defect_count = report.genus;
    return report;
}

MeshQuality mesh_quality(const TriangleMesh& mesh) {
    MeshQuality q;
    q.per_face.resize(mesh.faces.size(), 0.0);
    static const double four_sqrt3 = 4.0 * std::sqrt(3.0);
    double sum = 0.0;
    for (int f = 0; f < mesh.face_count(); ++f) {
        const auto& face = mesh.faces[std::size_t(f)];
        const Eigen::Vector3d& a = mesh.vertices[std::size_t(face[0])];
        const Eigen::Vector3d& b = mesh.vertices[std::size_t(face[1])];
        const Eigen::Vector3d& c = mesh.vertices[std::size_t(face[2])];
        const double e2 = (b - a).squaredNorm() + (c - b).squaredNorm() + (a - c).squaredNorm();
        const double area = 0.5 * (b - a).cross(c - a).norm();
        const double value = e2 > 0 ? four_sqrt3 * area / e2 : 0.0;
        q.per_face[std::size_t(f)] = value;
        sum += value;
    }
    q.mean = mesh.faces.empty() ? 0.0 : sum / double(mesh.faces.size());
    return q;
}

// ---------------------------------------------------------------------------
// Spectral machinery
// ---------------------------------------------------------------------------

Laplacian cotan_laplacian(const TriangleMesh& mesh) {
    validate_mesh(mesh);

    // manifold check allowing boundary: each undirected edge in <= 2 faces
    std::unordered_map<std::uint64_t, int> edge_count;
    edge_count.reserve(mesh.faces.size() * 2);
    for (const auto& f : mesh.faces)
        for (int e = 0; e < 3; ++e) {
            int a = f[std::size_t(e)], b = f[std::size_t((e + 1) % 3)];
            if (a > b) std::swap(a, b);
            if (++edge_count[EdgeKey::make(a, b)] > 2)
                throw NonManifold("edge " + std::to_string(a) + "-" + std::to_string(b) +
                                  " has more than two incident faces");
        }

    const int n = mesh.vertex_count();
    Laplacian lap;
    lap.lumped_mass = Eigen::VectorXd::Zero(n);

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(mesh.faces.size() * 12);
    int obtuse = 0;
    for (const auto& f : mesh.faces) {
        const Eigen::Vector3d& a = mesh.vertices[std::size_t(f[0])];
        const Eigen::Vector3d& b = mesh.vertices[std::size_t(f[1])];
        const Eigen::Vector3d& c = mesh.vertices[std::size_t(f[2])];
        const double double_area = (b - a).cross(c - a).norm();
        if (!(double_area > 0))
            throw NonManifold("degenerate zero-area face in cotangent assembly");

        // cot of the angle at each corner; negative weights from obtuse
        // triangles are kept
        const double cot_a = (b - a).dot(c - a) / double_area;
        const double cot_b = (a - b).dot(c - b) / double_area;
        const double cot_c = (a - c).dot(b - c) / double_area;
        obtuse += (cot_a < 0) + (cot_b < 0) + (cot_c < 0);

        const double w_bc = 0.5 * cot_a, w_ac = 0.5 * cot_b, w_ab = 0.5 * cot_c;
        auto add = [&](int i, int j, double w) {
            triplets.emplace_back(i, j, -w);
            triplets.emplace_back(j, i, -w);
            triplets.emplace_back(i, i, w);
            triplets.emplace_back(j, j, w);
        };
        add(f[1], f[2], w_bc);
        add(f[0], f[2], w_ac);
        add(f[0], f[1], w_ab);

        const double third = double_area / 6.0; // area/3 per corner
        for (int v : f) lap.lumped_mass[v] += third;
    }
    if (obtuse)
        log::debug("cotan_laplacian: ", obtuse, " obtuse corners (negative weights kept)");

    lap.stiffness.resize(n, n);
    lap.stiffness.setFromTriplets(triplets.begin(), triplets.end());
    lap.stiffness.makeCompressed();
    return lap;
}

namespace {

int graph_components(const Eigen::SparseMatrix<double>& s) {
    const int n = int(s.rows());
    std::vector<int> comp(std::size_t(n), -1);
    int count = 0;
    std::vector<int> stack;
    for (int seed = 0; seed < n; ++seed) {
        if (comp[std::size_t(seed)] >= 0) continue;
        ++count;
        comp[std::size_t(seed)] = count;
        stack.push_back(seed);
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (Eigen::SparseMatrix<double>::InnerIterator it(s, v); it; ++it) {
                const int u = int(it.row());
                if (comp[std::size_t(u)] < 0) {
                    comp[std::size_t(u)] = count;
                    stack.push_back(u);
                }
            }
        }
    }
    return count;
}

} // namespace

SpectralEmbedding smallest_eigenpairs(const Eigen::SparseMatrix<double>& stiffness,
                                      const Eigen::VectorXd& lumped_mass, int k) {
    const int n = int(stiffness.rows());
    if (k < 1 || n < k + 2) throw SolverNoConvergence("problem too small for k eigenpairs");
    for (int i = 0; i < n; ++i)
        if (!(lumped_mass[i] > 0)) throw SolverNoConvergence("nonpositive lumped mass entry");

    if (graph_components(stiffness) != 1)
        throw MultiComponent("stiffness graph is disconnected; constant kernel dimension > 1");

    // shift so the factorized operator is positive definite; eigenpairs of
    // (S + sigma M, M) are those of (S, M) shifted by sigma
    const double scale = stiffness.diagonal().sum() / lumped_mass.sum();
    const double sigma = 1e-3 * scale;

    Eigen::SparseMatrix<double> shifted = stiffness;
    for (int i = 0; i < n; ++i) shifted.coeffRef(i, i) += sigma * lumped_mass[i];
    shifted.makeCompressed();

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(shifted);
    if (solver.info() != Eigen::Success)
        throw SolverNoConvergence("sparse factorization of the shifted stiffness failed");

    const Eigen::VectorXd& m = lumped_mass;
    auto m_dot = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return a.dot(m.cwiseProduct(b));
    };

    Eigen::VectorXd constant = Eigen::VectorXd::Ones(n);
    constant /= std::sqrt(m_dot(constant, constant));

    const int block = std::max(2 * k + 2, 8);
    std::mt19937_64 rng(0x5eed5eed1234abcdULL); // fixed: results must be reproducible
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd v(n, block);
    for (int j = 0; j < block; ++j)
        for (int i = 0; i < n; ++i) v(i, j) = gauss(rng);

    auto deflate = [&](Eigen::MatrixXd& w) {
        for (int j = 0; j < w.cols(); ++j)
            w.col(j) -= constant * m_dot(constant, w.col(j));
    };
    auto m_orthonormalize = [&](Eigen::MatrixXd& w) {
        for (int j = 0; j < w.cols(); ++j) {
            for (int i = 0; i < j; ++i) w.col(j) -= w.col(i) * m_dot(w.col(i), w.col(j));
            const double norm = std::sqrt(m_dot(w.col(j), w.col(j)));
            if (norm < 1e-300) throw SolverNoConvergence("subspace collapsed during iteration");
            w.col(j) /= norm;
        }
    };

    deflate(v);
    m_orthonormalize(v);

    constexpr int kMaxIterations = 10000;
    constexpr double kTol = 1e-8;
    Eigen::VectorXd eigenvalues(block);
    for (int iter = 1; iter <= kMaxIterations; ++iter) {
        Eigen::MatrixXd w(n, block);
        for (int j = 0; j < block; ++j) w.col(j) = solver.solve(m.cwiseProduct(v.col(j)));
        deflate(w);
        m_orthonormalize(w);

        // Rayleigh-Ritz on the iterated subspace
        Eigen::MatrixXd sw = stiffness * w;
        Eigen::MatrixXd s_hat = w.transpose() * sw;
        Eigen::MatrixXd m_hat(block, block);
        for (int a = 0; a < block; ++a)
            for (int b = 0; b < block; ++b) m_hat(a, b) = m_dot(w.col(a), w.col(b));

        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ritz(s_hat, m_hat);
        if (ritz.info() != Eigen::Success)
            throw SolverNoConvergence("dense Rayleigh-Ritz step failed");
        v = w * ritz.eigenvectors();
        eigenvalues = ritz.eigenvalues();

        bool converged = true;
        for (int j = 0; j < k; ++j) {
            const Eigen::VectorXd residual =
                stiffness * v.col(j) - eigenvalues[j] * m.cwiseProduct(v.col(j));
            if (residual.norm() > kTol * std::sqrt(m_dot(v.col(j), v.col(j)))) {
                converged = false;
                break;
            }
        }
        if (converged) {
            SpectralEmbedding emb;
            emb.functions.resize(n, 3);
            for (int j = 0; j < k && j < 3; ++j) {
                Eigen::VectorXd f = v.col(j);
                f /= std::sqrt(m_dot(f, f));
                emb.functions.col(j) = f;
                emb.eigenvalues[j] = eigenvalues[j];
            }
            emb.mass_orthonormal = true;
            log::debug("smallest_eigenpairs: converged after ", iter, " iterations");
            return emb;
        }
    }
    throw SolverNoConvergence("no convergence within 10000 subspace iterations");
}

SpectralEmbedding orient_eigenfunctions(const SpectralEmbedding& emb,
                                        const std::vector<Eigen::Vector3d>& vertices) {
    const int n = int(emb.functions.rows());
    if (int(vertices.size()) != n)
        throw DegenerateOrientation("vertex count does not match embedding");

    Eigen::MatrixXd coords(n, 3);
    for (int i = 0; i < n; ++i) coords.row(i) = vertices[std::size_t(i)].transpose();

    auto correlation = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        const Eigen::VectorXd ca = a.array() - a.mean();
        const Eigen::VectorXd cb = b.array() - b.mean();
        const double denom = ca.norm() * cb.norm();
        return denom > 0 ? ca.dot(cb) / denom : 0.0;
    };

    Eigen::Matrix3d r;
    for (int f = 0; f < 3; ++f)
        for (int axis = 0; axis < 3; ++axis)
            r(f, axis) = correlation(emb.functions.col(f), coords.col(axis));

    // best assignment of eigenfunctions to axes over the 6 permutations
    static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                    {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    double best_score = -1;
    const int* best = nullptr;
    for (const auto& perm : perms) {
        double score = 0;
        for (int axis = 0; axis < 3; ++axis) score += std::abs(r(perm[axis], axis));
        if (score > best_score) {
            best_score = score;
            best = perm;
        }
    }

    SpectralEmbedding out = emb;
    for (int axis = 0; axis < 3; ++axis) {
        const int src = best[axis];
        const double corr = r(src, axis);
        if (std::abs(corr) < 0.1)
            throw DegenerateOrientation("eigenfunction/axis correlation " + std::to_string(corr) +
                                        " below 0.1 for axis " + std::to_string(axis));
        const double sign = corr < 0 ? -1.0 : 1.0;
        out.functions.col(axis) = sign * emb.functions.col(src);
        out.eigenvalues[axis] = emb.eigenvalues[src];
    }
    return out;
}

TriangleMesh spectral_sphere_map(const TriangleMesh& mesh, const SpectralEmbedding& oriented) {
    if (int(oriented.functions.rows()) != mesh.vertex_count())
        throw ZeroEmbeddingVector("embedding does not match mesh vertex count");

    double max_norm = 0;
    for (int i = 0; i < mesh.vertex_count(); ++i)
        max_norm = std::max(max_norm, oriented.functions.row(i).norm());
    if (!(max_norm > 0)) throw ZeroEmbeddingVector("embedding is identically zero");

    TriangleMesh out;
    out.faces = mesh.faces;
    out.vertices.resize(mesh.vertices.size());
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        const Eigen::Vector3d f = oriented.functions.row(i).transpose();
        const double norm = f.norm();
        if (norm <= 1e-12 * max_norm)
            throw ZeroEmbeddingVector("zero embedding vector at vertex " + std::to_string(i));
        out.vertices[std::size_t(i)] = f / norm;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Self-intersections
// ---------------------------------------------------------------------------

namespace {

// interval of the triangle cross-section along the intersection line
// (Moller 1997); vv = projections onto the line, dd = signed plane distances
bool interval_endpoints(const double vv[3], const double dd[3], double& t0, double& t1) {
    int isolated;
    if (dd[0] * dd[1] > 0) isolated = 2;
    else if (dd[0] * dd[2] > 0) isolated = 1;
    else if (dd[1] * dd[2] > 0 || dd[0] != 0) isolated = 0;
    else if (dd[1] != 0) isolated = 1;
    else if (dd[2] != 0) isolated = 2;
    else return false; // coplanar

    const int o1 = (isolated + 1) % 3, o2 = (isolated + 2) % 3;
    const double di = dd[isolated];
    t0 = vv[isolated] + (vv[o1] - vv[isolated]) * di / (di - dd[o1]);
    t1 = vv[isolated] + (vv[o2] - vv[isolated]) * di / (di - dd[o2]);
    return true;
}

bool coplanar_overlap(const Eigen::Vector3d t1[3], const Eigen::Vector3d t2[3],
                      const Eigen::Vector3d& normal, double eps) {
    // project onto the dominant-axis plane
    int drop = 0;
    Eigen::Vector3d an = normal.cwiseAbs();
    if (an.y() > an.x()) drop = 1;
    if (an.z() > an[drop]) drop = 2;
    const int u = (drop + 1) % 3, v = (drop + 2) % 3;

    auto orient = [&](const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                      const Eigen::Vector3d& c) {
        return (b[u] - a[u]) * (c[v] - a[v]) - (b[v] - a[v]) * (c[u] - a[u]);
    };
    auto segments_cross = [&](const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                              const Eigen::Vector3d& c, const Eigen::Vector3d& d) {
        const double o1 = orient(a, b, c), o2 = orient(a, b, d);
        const double o3 = orient(c, d, a), o4 = orient(c, d, b);
        return ((o1 > eps && o2 < -eps) || (o1 < -eps && o2 > eps)) &&
               ((o3 > eps && o4 < -eps) || (o3 < -eps && o4 > eps));
    };
    auto point_in_tri = [&](const Eigen::Vector3d& p, const Eigen::Vector3d tri[3]) {
        const double o1 = orient(tri[0], tri[1], p);
        const double o2 = orient(tri[1], tri[2], p);
        const double o3 = orient(tri[2], tri[0], p);
        return (o1 >= -eps && o2 >= -eps && o3 >= -eps) ||
               (o1 <= eps && o2 <= eps && o3 <= eps);
    };

    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (segments_cross(t1[i], t1[(i + 1) % 3], t2[j], t2[(j + 1) % 3])) return true;
    return point_in_tri(t1[0], t2) || point_in_tri(t2[0], t1);
}

} // namespace

bool triangles_intersect(const Eigen::Vector3d& a0, const Eigen::Vector3d& a1,
                         const Eigen::Vector3d& a2, const Eigen::Vector3d& b0,
                         const Eigen::Vector3d& b1, const Eigen::Vector3d& b2, double eps) {
    const Eigen::Vector3d ta[3] = {a0, a1, a2};
    const Eigen::Vector3d tb[3] = {b0, b1, b2};

    const Eigen::Vector3d n1 = (a1 - a0).cross(a2 - a0);
    double db[3];
    for (int i = 0; i < 3; ++i) {
        db[i] = n1.dot(tb[i] - a0);
        if (std::abs(db[i]) < eps) db[i] = 0;
    }
    if ((db[0] > 0 && db[1] > 0 && db[2] > 0) || (db[0] < 0 && db[1] < 0 && db[2] < 0))
        return false;

    const Eigen::Vector3d n2 = (b1 - b0).cross(b2 - b0);
    double da[3];
    for (int i = 0; i < 3; ++i) {
        da[i] = n2.dot(ta[i] - b0);
        if (std::abs(da[i]) < eps) da[i] = 0;
    }
    if ((da[0] > 0 && da[1] > 0 && da[2] > 0) || (da[0] < 0 && da[1] < 0 && da[2] < 0))
        return false;

    const Eigen::Vector3d dline = n1.cross(n2);
    const bool coplanar = da[0] == 0 && da[1] == 0 && da[2] == 0;
    if (coplanar || dline.squaredNorm() < eps * eps) return coplanar_overlap(ta, tb, n1, eps);

    int axis = 0;
    const Eigen::Vector3d ad = dline.cwiseAbs();
    if (ad.y() > ad.x()) axis = 1;
    if (ad.z() > ad[axis]) axis = 2;

    const double va[3] = {ta[0][axis], ta[1][axis], ta[2][axis]};
    const double vb[3] = {tb[0][axis], tb[1][axis], tb[2][axis]};
    double s0, s1, t0, t1;
    if (!interval_endpoints(va, da, s0, s1)) return coplanar_overlap(ta, tb, n1, eps);
    if (!interval_endpoints(vb, db, t0, t1)) return coplanar_overlap(ta, tb, n1, eps);
    if (s0 > s1) std::swap(s0, s1);
    if (t0 > t1) std::swap(t0, t1);
    return s1 >= t0 - eps && t1 >= s0 - eps;
}

SelfIntersections self_intersections(const TriangleMesh& mesh) {
    constexpr double kEps = 1e-9;
    SelfIntersections result;
    if (mesh.faces.empty()) return result;

    detail::AabbTree tree(mesh);
    std::vector<int> candidates;
    for (int f = 0; f < mesh.face_count(); ++f) {
        const auto& fa = mesh.faces[std::size_t(f)];
        detail::Aabb box;
        for (int v : fa) box.expand(mesh.vertices[std::size_t(v)]);

        candidates.clear();
        tree.collect_overlaps(box, kEps, candidates);
        for (int g : candidates) {
            if (g <= f) continue; // count each pair once
            const auto& fb = mesh.faces[std::size_t(g)];
            bool shared = false;
            for (int va : fa)
                for (int vb : fb) shared |= va == vb;
            if (shared) continue; // adjacent faces are excluded
            if (triangles_intersect(mesh.vertices[std::size_t(fa[0])],
                                    mesh.vertices[std::size_t(fa[1])],
                                    mesh.vertices[std::size_t(fa[2])],
                                    mesh.vertices[std::size_t(fb[0])],
                                    mesh.vertices[std::size_t(fb[1])],
                                    mesh.vertices[std::size_t(fb[2])], kEps)) {
                ++result.count;
                result.pairs.push_back({f, g});
            }
        }
    }
    std::sort(result.pairs.begin(), result.pairs.end());
    return result;
}

double metric_distortion(const TriangleMesh& mesh, const TriangleMesh& sphere_map) {
    if (mesh.vertex_count() != sphere_map.vertex_count() || mesh.faces != sphere_map.faces)
        throw ShapeMismatch("metric_distortion requires identical topology");

    const auto edges = unique_edges(mesh);
    if (edges.empty()) return 0.0;

    std::vector<double> log_ratio;
    log_ratio.reserve(edges.size());
    double mean_log = 0;
    for (const auto& e : edges) {
        const double orig =
            (mesh.vertices[std::size_t(e[0])] - mesh.vertices[std::size_t(e[1])]).norm();
        const double mapped =
            (sphere_map.vertices[std::size_t(e[0])] - sphere_map.vertices[std::size_t(e[1])]).norm();
        if (!(orig > 0) || !(mapped > 0)) {
            log::warn("metric_distortion: zero-length edge skipped");
            continue;
        }
        log_ratio.push_back(std::log(mapped / orig));
        mean_log += log_ratio.back();
    }
    if (log_ratio.empty()) return 0.0;
    mean_log /= double(log_ratio.size());

    // centering on the mean log ratio is the optimal global rescaling
    double sum = 0;
    for (double r : log_ratio) sum += std::abs(r - mean_log);
    return sum / double(log_ratio.size());
}

} // namespace cortexkit::surfgen
