// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "cortexkit/label_table.hpp"
#include "cortexkit/mesh.hpp"
#include "cortexkit/types.hpp"

namespace cortexkit::surfmeasure {

using SurfaceLabeling = std::vector<std::uint16_t>; // one internal id per vertex, 0 = none
using ThicknessMap = std::vector<double>;           // mm, per vertex

/// Sample cortical labels along the inward vertex normal (2 mm reach,
/// 0.25 mm steps starting at the vertex's own voxel, first cortical label
/// wins; no cortical label within reach gives 0). Vertices more than
/// 5 voxels outside the volume raise OutOfBounds.
SurfaceLabeling sample_labels_to_surface(const LabelVolume& labels, const TriangleMesh& mesh,
                                         const LabelTable& table);

/// Symmetric two-sided nearest-distance thickness, attached to the first
/// mesh's vertices: t(v) = (d(v, other) + d(closest point on other, self))/2.
ThicknessMap thickness(const TriangleMesh& white, const TriangleMesh& pial);

/// Signed mean curvature from the cotan Laplacian of the coordinates,
/// H(v) = sign * ||(S X)(v)|| / (2 mass(v)); positive where the surface
/// bends away from the outward normal (sphere of radius r gives 1/r).
std::vector<double> mean_curvature(const TriangleMesh& mesh);

struct SmoothSpec {
    double fwhm_mm = 15.0;
};

/// Iterated mass-weighted neighborhood averaging. The iteration count is
/// round(fwhm^2 / (16 ln2 * mean squared edge length)). Conserves the
/// mass-weighted total and obeys the discrete maximum principle.
std::vector<double> smooth_scalar(const std::vector<double>& map, const TriangleMesh& mesh,
                                  const SmoothSpec& spec);

struct RoiStats {
    double mean_thickness = 0.0;
    double mean_abs_curvature = 0.0;
    double area_mm2 = 0.0;
};

/// Vertex-area-weighted per-ROI means; ROI areas partition the labeled area.
std::map<std::uint16_t, RoiStats> roi_stats(const SurfaceLabeling& labeling,
                                            const ThicknessMap& thickness,
                                            const std::vector<double>& curvature,
                                            const TriangleMesh& mesh);

/// Area-weighted per-label Dice between two labelings of one mesh.
std::map<std::uint16_t, double> surface_dice(const SurfaceLabeling& a, const SurfaceLabeling& b,
                                             const TriangleMesh& mesh);

} // namespace cortexkit::surfmeasure
