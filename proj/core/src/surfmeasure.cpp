// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "cortexkit/surfmeasure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cortexkit/detail/aabb_tree.hpp"
#include "cortexkit/log.hpp"
#include "cortexkit/surfgen.hpp"

namespace cortexkit::surfmeasure {

namespace {

constexpr double kRayReachMm = 2.0;
constexpr double kRayStepMm = 0.25;

std::uint16_t label_at_mm(const LabelVolume& labels, const Eigen::Vector3d& p_mm) {
    const auto& h = labels.header;
    const int x = int(std::floor(p_mm.x() / h.voxel_size_mm[0]));
    const int y = int(std::floor(p_mm.y() / h.voxel_size_mm[1]));
    const int z = int(std::floor(p_mm.z() / h.voxel_size_mm[2]));
    if (!labels.in_bounds(x, y, z)) return 0;
    return labels.at(x, y, z);
}

} // namespace

SurfaceLabeling sample_labels_to_surface(const LabelVolume& labels, const TriangleMesh& mesh,
                                         const LabelTable& table) {
    const auto normals = vertex_normals(mesh);
    const auto& h = labels.header;

    std::vector<bool> cortical(65536, false);
    for (const auto& e : table.entries())
        if (e.is_cortical()) cortical[e.internal_id] = true;

    SurfaceLabeling labeling(mesh.vertices.size(), 0);
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        const Eigen::Vector3d& p = mesh.vertices[std::size_t(v)];

        for (int axis = 0; axis < 3; ++axis) {
            const double lo = -5.0 * h.voxel_size_mm[axis];
            const double hi = (double(h.dims[axis]) + 5.0) * h.voxel_size_mm[axis];
            if (p[axis] < lo || p[axis] > hi)
                throw OutOfBounds("vertex " + std::to_string(v) + " lies more than 5 voxels " +
                                  "outside the volume on axis " + std::to_string(axis));
        }

        // walk inward starting at the vertex's own voxel; the first cortical
        // label wins, anything else (or nothing within reach) maps to 0
        const Eigen::Vector3d step = -normals[std::size_t(v)] * kRayStepMm;
        std::uint16_t found = 0;
        const int steps = int(std::round(kRayReachMm / kRayStepMm));
        for (int s = 0; s <= steps; ++s) {
            const std::uint16_t id = label_at_mm(labels, p + double(s) * step);
            if (id != 0 && cortical[id]) {
                found = id;
                break;
            }
        }
        labeling[std::size_t(v)] = found;
    }
    return labeling;
}

ThicknessMap thickness(const TriangleMesh& white, const TriangleMesh& pial) {
    if (white.faces.empty() || pial.faces.empty())
        throw EmptyMesh("thickness requires two non-empty meshes");

    detail::AabbTree to_pial(pial);
    detail::AabbTree to_white(white);

    ThicknessMap map(white.vertices.size(), 0.0);
    for (int v = 0; v < white.vertex_count(); ++v) {
        const auto hit = to_pial.nearest(white.vertices[std::size_t(v)]);
        const auto back = to_white.nearest(hit.point);
        map[std::size_t(v)] = 0.5 * (hit.distance + back.distance);
    }
    return map;
}

std::vector<double> mean_curvature(const TriangleMesh& mesh) {
    const auto lap = surfgen::cotan_laplacian(mesh);
    const auto normals = vertex_normals(mesh);

    Eigen::MatrixX3d coords(mesh.vertex_count(), 3);
    for (int v = 0; v < mesh.vertex_count(); ++v)
        coords.row(v) = mesh.vertices[std::size_t(v)].transpose();
    const Eigen::MatrixX3d sx = lap.stiffness * coords;

    std::vector<double> curvature(mesh.vertices.size(), 0.0);
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        const Eigen::Vector3d hvec = sx.row(v).transpose() / (2.0 * lap.lumped_mass[v]);
        const double magnitude = hvec.norm();
        const double sign = hvec.dot(normals[std::size_t(v)]) < 0 ? -1.0 : 1.0;
        curvature[std::size_t(v)] = sign * magnitude;
    }
    return curvature;
}

std::vector<double> smooth_scalar(const std::vector<double>& map, const TriangleMesh& mesh,
                                  const SmoothSpec& spec) {
    if (map.size() != mesh.vertices.size())
        throw EmptyMesh("scalar map length does not match mesh");
    if (!(spec.fwhm_mm > 0)) throw EmptyMesh("fwhm must be positive");

    const auto edges = unique_edges(mesh);
    if (edges.empty()) return map;
    double mean_sq_edge = 0;
    for (const auto& e : edges)
        mean_sq_edge +=
            (mesh.vertices[std::size_t(e[0])] - mesh.vertices[std::size_t(e[1])]).squaredNorm();
    mean_sq_edge /= double(edges.size());

    const int iterations =
        int(std::lround(spec.fwhm_mm * spec.fwhm_mm / (16.0 * std::numbers::ln2 * mean_sq_edge)));
    if (iterations <= 0) return map;

    // Symmetric mass-flux averaging: conserves sum(m_v f_v) exactly and is a
    // convex combination at every vertex (discrete maximum principle).
    const auto masses = vertex_areas(mesh);
    std::vector<double> coupling(edges.size());
    std::vector<double> outflow(mesh.vertices.size(), 0.0);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const double ma = masses[std::size_t(edges[e][0])], mb = masses[std::size_t(edges[e][1])];
        coupling[e] = ma * mb / (ma + mb);
        outflow[std::size_t(edges[e][0])] += coupling[e];
        outflow[std::size_t(edges[e][1])] += coupling[e];
    }
    double theta = std::numeric_limits<double>::max();
    for (std::size_t v = 0; v < masses.size(); ++v)
        if (outflow[v] > 0) theta = std::min(theta, masses[v] / outflow[v]);
    theta *= 0.5;

    std::vector<double> current = map, next(map.size());
    for (int it = 0; it < iterations; ++it) {
        next = current;
        for (std::size_t e = 0; e < edges.size(); ++e) {
            const int a = edges[e][0], b = edges[e][1];
            const double flux = theta * coupling[e] * (current[std::size_t(b)] - current[std::size_t(a)]);
            next[std::size_t(a)] += flux / masses[std::size_t(a)];
            next[std::size_t(b)] -= flux / masses[std::size_t(b)];
        }
        std::swap(current, next);
    }
    return current;
}

std::map<std::uint16_t, RoiStats> roi_stats(const SurfaceLabeling& labeling,
                                            const ThicknessMap& thickness,
                                            const std::vector<double>& curvature,
                                            const TriangleMesh& mesh) {
    if (labeling.size() != mesh.vertices.size() || thickness.size() != mesh.vertices.size() ||
        curvature.size() != mesh.vertices.size())
        throw EmptyMesh("roi_stats inputs must all match the mesh vertex count");

    const auto areas = vertex_areas(mesh);
    struct Accumulator {
        double area = 0, thickness = 0, curvature = 0;
    };
    std::map<std::uint16_t, Accumulator> acc;
    for (std::size_t v = 0; v < labeling.size(); ++v) {
        if (labeling[v] == 0) continue;
        auto& a = acc[labeling[v]];
        a.area += areas[v];
        a.thickness += areas[v] * thickness[v];
        a.curvature += areas[v] * std::abs(curvature[v]);
    }

    std::map<std::uint16_t, RoiStats> out;
    for (const auto& [roi, a] : acc) {
        RoiStats s;
        s.area_mm2 = a.area;
        s.mean_thickness = a.area > 0 ? a.thickness / a.area : 0.0;
        s.mean_abs_curvature = a.area > 0 ? a.curvature / a.area : 0.0;
        out[roi] = s;
    }
    return out;
}

std::map<std::uint16_t, double> surface_dice(const SurfaceLabeling& a, const SurfaceLabeling& b,
                                             const TriangleMesh& mesh) {
    if (a.size() != mesh.vertices.size() || b.size() != mesh.vertices.size())
        throw EmptyMesh("surface_dice labelings must match the mesh vertex count");

    const auto areas = vertex_areas(mesh);
    std::map<std::uint16_t, double> area_a, area_b, overlap;
    for (std::size_t v = 0; v < a.size(); ++v) {
        if (a[v] != 0) area_a[a[v]] += areas[v];
        if (b[v] != 0) area_b[b[v]] += areas[v];
        if (a[v] != 0 && a[v] == b[v]) overlap[a[v]] += areas[v];
    }

    std::map<std::uint16_t, double> dsc;
    for (const auto& [label, area] : area_a) {
        const double denom = area + (area_b.count(label) ? area_b[label] : 0.0);
        dsc[label] = denom > 0 ? 2.0 * (overlap.count(label) ? overlap[label] : 0.0) / denom : 0.0;
    }
    for (const auto& [label, area] : area_b)
        if (!dsc.count(label)) dsc[label] = 0.0;
    return dsc;
}

} // namespace cortexkit::surfmeasure
