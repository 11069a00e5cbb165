// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "cortexkit/label_table.hpp"
#include "cortexkit/types.hpp"

namespace cortexkit::voxelgrid {

enum class Connectivity { Face6, Edge18, Vertex26 };

struct StructuringElement {
    int radius_vox = 1;
    Connectivity connectivity = Connectivity::Vertex26;
};

/// Resample to the target geometry. Labels use nearest neighbor, so the
/// output label set is a subset of the input's; intensities use trilinear
/// interpolation. A target equal to the source header is the identity.
LabelVolume conform(const LabelVolume& volume, const VolumeHeader& target);
FloatVolume conform(const FloatVolume& volume, const VolumeHeader& target);

/// 1 mm isotropic header covering the same physical extent.
VolumeHeader conform_target(const VolumeHeader& source, float voxel_mm = 1.0f);

BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se);
BinaryMask erode(const BinaryMask& mask, const StructuringElement& se);
/// erode(dilate(m)); evaluated on an internally padded grid so that
/// closure(m) is always a superset of m.
BinaryMask closure(const BinaryMask& mask, const StructuringElement& se);

BinaryMask nonzero_mask(const LabelVolume& labels);

/// Closure of all labeled voxels (Vertex26, radius 2), plus a one-voxel
/// Face6 padding layer around cortical labels when pad_cortex is set.
/// Lateral orbital frontal and pars orbitalis are never padded.
BinaryMask make_brainmask(const LabelVolume& labels, const LabelTable& table, bool pad_cortex);

struct ConnectedComponents {
    ComponentVolume ids;             // dense 1..K, 0 = background
    std::vector<std::size_t> sizes;  // sizes[c-1] = voxels in component c
};
/// Component ids are assigned in x-fastest first-voxel scan order.
ConnectedComponents connected_components(const BinaryMask& mask, Connectivity connectivity);

/// Reassign each MergedPair cluster (Vertex26 components) to its left or
/// right FS code by mm distance from the cluster centroid to the nearer
/// cerebral WM centroid. Ties go Left (logged). With restore_sagittal,
/// clusters of a shared sagittal id are resolved back to the lh/rh internal
/// ids instead.
LabelVolume lateralize(const LabelVolume& labels, const LabelTable& table,
                       bool restore_sagittal = false);

/// Map lateral pairs onto their shared sagittal ids (78 -> 50 classes on
/// the full DKT table).
LabelVolume merge_sagittal(const LabelVolume& labels, const LabelTable& table);

} // namespace cortexkit::voxelgrid
