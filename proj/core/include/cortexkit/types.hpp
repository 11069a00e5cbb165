// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <variant>
#include <vector>

#include "cortexkit/errors.hpp"

namespace cortexkit {

enum class Dtype : std::uint8_t { U8 = 0, U16 = 1, F32 = 2 };

inline int dtype_size(Dtype d) {
    switch (d) {
    case Dtype::U8: return 1;
    case Dtype::U16: return 2;
    case Dtype::F32: return 4;
    }
    return 0;
}

struct VolumeHeader {
    std::array<std::uint32_t, 3> dims{0, 0, 0};
    std::array<float, 3> voxel_size_mm{1.f, 1.f, 1.f};
    Dtype dtype = Dtype::U8;

    std::size_t voxel_count() const {
        return std::size_t(dims[0]) * dims[1] * dims[2];
    }
    bool valid() const {
        return dims[0] >= 1 && dims[1] >= 1 && dims[2] >= 1 && voxel_size_mm[0] > 0 &&
               voxel_size_mm[1] > 0 && voxel_size_mm[2] > 0;
    }
    friend bool operator==(const VolumeHeader&, const VolumeHeader&) = default;
};

/// Dense 3D grid, x varies fastest.
template <class T>
struct VoxelGrid {
    VolumeHeader header;
    std::vector<T> values;

    VoxelGrid() = default;
    VoxelGrid(const VolumeHeader& h, T fill = T{}) : header(h), values(h.voxel_count(), fill) {}

    std::size_t index(int x, int y, int z) const {
        return std::size_t(x) + header.dims[0] * (std::size_t(y) + header.dims[1] * std::size_t(z));
    }
    T& at(int x, int y, int z) { return values[index(x, y, z)]; }
    const T& at(int x, int y, int z) const { return values[index(x, y, z)]; }
    bool in_bounds(int x, int y, int z) const {
        return x >= 0 && y >= 0 && z >= 0 && x < int(header.dims[0]) && y < int(header.dims[1]) &&
               z < int(header.dims[2]);
    }
    /// Center of voxel (x,y,z) in the volume's mm frame.
    std::array<double, 3> voxel_center_mm(int x, int y, int z) const {
        return {(x + 0.5) * header.voxel_size_mm[0], (y + 0.5) * header.voxel_size_mm[1],
                (z + 0.5) * header.voxel_size_mm[2]};
    }
    friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;
};

using LabelVolume = VoxelGrid<std::uint16_t>;   // internal ids, background = 0
using BinaryMask = VoxelGrid<std::uint8_t>;     // 0/1
using FloatVolume = VoxelGrid<float>;
using ComponentVolume = VoxelGrid<std::uint32_t>;

/// A volume as read from disk: header plus payload in its native dtype.
struct Volume {
    VolumeHeader header;
    std::variant<std::vector<std::uint8_t>, std::vector<std::uint16_t>, std::vector<float>> data;

    Dtype dtype() const { return static_cast<Dtype>(data.index()); }
    friend bool operator==(const Volume&, const Volume&) = default;
};

LabelVolume as_labels(const Volume& v);   // U8/U16 payloads; F32 -> UnsupportedDtype
FloatVolume as_floats(const Volume& v);   // any payload, widened to float
Volume to_volume(const LabelVolume& v);
Volume to_volume(const BinaryMask& v);
Volume to_volume(const FloatVolume& v);

} // namespace cortexkit
