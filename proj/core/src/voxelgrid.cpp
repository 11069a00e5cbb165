// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "cortexkit/voxelgrid.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "cortexkit/log.hpp"

namespace cortexkit::voxelgrid {

namespace {

const std::array<std::array<int, 3>, 26>& neighbor_offsets() {
    // Face neighbors first, then edge, then vertex, so a prefix selects the
    // requested connectivity.
    static const auto offsets = [] {
        std::array<std::array<int, 3>, 26> all{};
        int face = 0, edge = 6, vertex = 18;
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nz = std::abs(dx) + std::abs(dy) + std::abs(dz);
                    if (nz == 0) continue;
                    std::array<int, 3> o{dx, dy, dz};
                    if (nz == 1) all[std::size_t(face++)] = o;
                    else if (nz == 2) all[std::size_t(edge++)] = o;
                    else all[std::size_t(vertex++)] = o;
                }
        return all;
    }();
    return offsets;
}

int neighbor_count(Connectivity c) {
    switch (c) {
    case Connectivity::Face6: return 6;
    case Connectivity::Edge18: return 18;
    case Connectivity::Vertex26: return 26;
    }
    return 6;
}

BinaryMask dilate_once(const BinaryMask& mask, Connectivity connectivity) {
    BinaryMask out = mask;
    const int nn = neighbor_count(connectivity);
    const auto& offs = neighbor_offsets();
    const int nx = int(mask.header.dims[0]), ny = int(mask.header.dims[1]),
              nz = int(mask.header.dims[2]);
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                if (mask.at(x, y, z)) continue;
                for (int k = 0; k < nn; ++k) {
                    const auto& o = offs[std::size_t(k)];
                    const int px = x + o[0], py = y + o[1], pz = z + o[2];
                    if (mask.in_bounds(px, py, pz) && mask.at(px, py, pz)) {
                        out.at(x, y, z) = 1;
                        break;
                    }
                }
            }
    return out;
}

BinaryMask erode_once(const BinaryMask& mask, Connectivity connectivity) {
    BinaryMask out = mask;
    const int nn = neighbor_count(connectivity);
    const auto& offs = neighbor_offsets();
    const int nx = int(mask.header.dims[0]), ny = int(mask.header.dims[1]),
              nz = int(mask.header.dims[2]);
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                if (!mask.at(x, y, z)) continue;
                for (int k = 0; k < nn; ++k) {
                    const auto& o = offs[std::size_t(k)];
                    const int px = x + o[0], py = y + o[1], pz = z + o[2];
                    // out-of-bounds counts as background
                    if (!mask.in_bounds(px, py, pz) || !mask.at(px, py, pz)) {
                        out.at(x, y, z) = 0;
                        break;
                    }
                }
            }
    return out;
}

BinaryMask pad_mask(const BinaryMask& mask, int pad) {
    VolumeHeader h = mask.header;
    for (int i = 0; i < 3; ++i) h.dims[i] += std::uint32_t(2 * pad);
    BinaryMask out(h, 0);
    for (int z = 0; z < int(mask.header.dims[2]); ++z)
        for (int y = 0; y < int(mask.header.dims[1]); ++y)
            for (int x = 0; x < int(mask.header.dims[0]); ++x)
                out.at(x + pad, y + pad, z + pad) = mask.at(x, y, z);
    return out;
}

BinaryMask crop_mask(const BinaryMask& mask, const VolumeHeader& target, int pad) {
    BinaryMask out(target, 0);
    for (int z = 0; z < int(target.dims[2]); ++z)
        for (int y = 0; y < int(target.dims[1]); ++y)
            for (int x = 0; x < int(target.dims[0]); ++x)
                out.at(x, y, z) = mask.at(x + pad, y + pad, z + pad);
    return out;
}

template <class T, class Sample>
VoxelGrid<T> resample(const VoxelGrid<T>& src, const VolumeHeader& target, Sample&& sample) {
    VoxelGrid<T> out(target);
    out.header.dtype = src.header.dtype;
    for (int z = 0; z < int(target.dims[2]); ++z)
        for (int y = 0; y < int(target.dims[1]); ++y)
            for (int x = 0; x < int(target.dims[0]); ++x) {
                // continuous source index of this target voxel center
                const double sx =
                    (x + 0.5) * target.voxel_size_mm[0] / src.header.voxel_size_mm[0] - 0.5;
                const double sy =
                    (y + 0.5) * target.voxel_size_mm[1] / src.header.voxel_size_mm[1] - 0.5;
                const double sz =
                    (z + 0.5) * target.voxel_size_mm[2] / src.header.voxel_size_mm[2] - 0.5;
                out.at(x, y, z) = sample(sx, sy, sz);
            }
    return out;
}

int clamp_index(long v, int dim) { return int(std::clamp<long>(v, 0, dim - 1)); }

} // namespace

VolumeHeader conform_target(const VolumeHeader& source, float voxel_mm) {
    VolumeHeader t = source;
    for (int i = 0; i < 3; ++i) {
        const double extent = double(source.dims[i]) * source.voxel_size_mm[i];
        t.dims[i] = std::uint32_t(std::max(1.0, std::round(extent / voxel_mm)));
        t.voxel_size_mm[i] = voxel_mm;
    }
    return t;
}

LabelVolume conform(const LabelVolume& volume, const VolumeHeader& target) {
    if (volume.values.empty()) throw EmptyVolume("conform: empty input volume");
    VolumeHeader want = target;
    want.dtype = volume.header.dtype;
    if (want == volume.header) return volume;

    const int dx = int(volume.header.dims[0]), dy = int(volume.header.dims[1]),
              dz = int(volume.header.dims[2]);
    return resample(volume, want, [&](double sx, double sy, double sz) {
        const int ix = clamp_index(std::llround(sx), dx);
        const int iy = clamp_index(std::llround(sy), dy);
        const int iz = clamp_index(std::llround(sz), dz);
        return volume.at(ix, iy, iz);
    });
}

FloatVolume conform(const FloatVolume& volume, const VolumeHeader& target) {
    if (volume.values.empty()) throw EmptyVolume("conform: empty input volume");
    VolumeHeader want = target;
    want.dtype = volume.header.dtype;
    if (want == volume.header) return volume;

    const int dx = int(volume.header.dims[0]), dy = int(volume.header.dims[1]),
              dz = int(volume.header.dims[2]);
    return resample(volume, want, [&](double sx, double sy, double sz) {
        const double cx = std::clamp(sx, 0.0, double(dx - 1));
        const double cy = std::clamp(sy, 0.0, double(dy - 1));
        const double cz = std::clamp(sz, 0.0, double(dz - 1));
        const int x0 = int(cx), y0 = int(cy), z0 = int(cz);
        const int x1 = std::min(x0 + 1, dx - 1), y1 = std::min(y0 + 1, dy - 1),
                  z1 = std::min(z0 + 1, dz - 1);
        const double fx = cx - x0, fy = cy - y0, fz = cz - z0;
        auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
        const double c00 = lerp(volume.at(x0, y0, z0), volume.at(x1, y0, z0), fx);
        const double c10 = lerp(volume.at(x0, y1, z0), volume.at(x1, y1, z0), fx);
        const double c01 = lerp(volume.at(x0, y0, z1), volume.at(x1, y0, z1), fx);
        const double c11 = lerp(volume.at(x0, y1, z1), volume.at(x1, y1, z1), fx);
        return float(lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz));
    });
}

BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se) {
    BinaryMask out = mask;
    for (int r = 0; r < se.radius_vox; ++r) out = dilate_once(out, se.connectivity);
    return out;
}

BinaryMask erode(const BinaryMask& mask, const StructuringElement& se) {
    BinaryMask out = mask;
    for (int r = 0; r < se.radius_vox; ++r) out = erode_once(out, se.connectivity);
    return out;
}

BinaryMask closure(const BinaryMask& mask, const StructuringElement& se) {
    // Padding by the radius reproduces the infinite-grid closing, which is
    // extensive; clipping at the boundary would not be.
    const int pad = se.radius_vox;
    BinaryMask work = pad_mask(mask, pad);
    work = dilate(work, se);
    work = erode(work, se);
    return crop_mask(work, mask.header, pad);
}

BinaryMask nonzero_mask(const LabelVolume& labels) {
    BinaryMask mask(labels.header);
    mask.header.dtype = Dtype::U8;
    for (std::size_t i = 0; i < labels.values.size(); ++i)
        mask.values[i] = labels.values[i] != 0 ? 1 : 0;
    return mask;
}

BinaryMask make_brainmask(const LabelVolume& labels, const LabelTable& table, bool pad_cortex) {
    BinaryMask mask = closure(nonzero_mask(labels), {2, Connectivity::Vertex26});

    if (pad_cortex) {
        std::map<std::uint16_t, bool> pad_label;
        const int nx = int(labels.header.dims[0]), ny = int(labels.header.dims[1]),
                  nz = int(labels.header.dims[2]);
        static const int face[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                       {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x) {
                    const std::uint16_t id = labels.at(x, y, z);
                    if (id == 0) continue;
                    auto it = pad_label.find(id);
                    if (it == pad_label.end()) {
                        const auto* e = table.find(id);
                        const bool pad = e && e->is_cortical() && !table.padding_excluded(id);
                        it = pad_label.emplace(id, pad).first;
                    }
                    if (!it->second) continue;
                    for (const auto& o : face) {
                        const int px = x + o[0], py = y + o[1], pz = z + o[2];
                        if (mask.in_bounds(px, py, pz)) mask.at(px, py, pz) = 1;
                    }
                }
    }
    return mask;
}

ConnectedComponents connected_components(const BinaryMask& mask, Connectivity connectivity) {
    ConnectedComponents cc;
    cc.ids = ComponentVolume(mask.header, 0);
    cc.ids.header.dtype = Dtype::U16; // header dtype is cosmetic for in-memory grids

    const int nn = neighbor_count(connectivity);
    const auto& offs = neighbor_offsets();
    const int nx = int(mask.header.dims[0]), ny = int(mask.header.dims[1]),
              nz = int(mask.header.dims[2]);

    std::vector<std::array<int, 3>> stack;
    std::uint32_t next_id = 0;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                if (!mask.at(x, y, z) || cc.ids.at(x, y, z) != 0) continue;
                ++next_id;
                std::size_t size = 0;
                stack.push_back({x, y, z});
                cc.ids.at(x, y, z) = next_id;
                while (!stack.empty()) {
                    auto [cx, cy, cz] = stack.back();
                    stack.pop_back();
                    ++size;
                    for (int k = 0; k < nn; ++k) {
                        const auto& o = offs[std::size_t(k)];
                        const int px = cx + o[0], py = cy + o[1], pz = cz + o[2];
                        if (!mask.in_bounds(px, py, pz)) continue;
                        if (!mask.at(px, py, pz) || cc.ids.at(px, py, pz) != 0) continue;
                        cc.ids.at(px, py, pz) = next_id;
                        stack.push_back({px, py, pz});
                    }
                }
                cc.sizes.push_back(size);
            }
    return cc;
}

namespace {

struct Centroid {
    double x = 0, y = 0, z = 0;
    std::size_t n = 0;
    void add(const std::array<double, 3>& p) {
        x += p[0];
        y += p[1];
        z += p[2];
        ++n;
    }
    double dist2(const Centroid& o) const {
        const double dx = x / double(n) - o.x / double(o.n);
        const double dy = y / double(n) - o.y / double(o.n);
        const double dz = z / double(n) - o.z / double(o.n);
        return dx * dx + dy * dy + dz * dz;
    }
};

} // namespace

namespace {

struct LateralTarget {
    std::uint16_t left, right;
};

/// Per-cluster reassignment of one label id by a caller-supplied rule.
void assign_clusters(LabelVolume& out, const LabelVolume& labels, std::uint16_t id,
                     const std::function<std::uint16_t(const Centroid&)>& side_of) {
    BinaryMask mask(labels.header);
    mask.header.dtype = Dtype::U8;
    bool present = false;
    for (std::size_t i = 0; i < labels.values.size(); ++i) {
        mask.values[i] = labels.values[i] == id ? 1 : 0;
        present |= mask.values[i] != 0;
    }
    if (!present) return;

    // Cortical parcels may touch only diagonally across sulci.
    auto cc = connected_components(mask, Connectivity::Vertex26);
    std::vector<Centroid> centroids(cc.sizes.size());
    const int nx = int(labels.header.dims[0]), ny = int(labels.header.dims[1]),
              nz = int(labels.header.dims[2]);
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                const std::uint32_t c = cc.ids.at(x, y, z);
                if (c) centroids[c - 1].add(labels.voxel_center_mm(x, y, z));
            }
    std::vector<std::uint16_t> assignment(cc.sizes.size());
    for (std::size_t c = 0; c < centroids.size(); ++c) assignment[c] = side_of(centroids[c]);
    for (std::size_t i = 0; i < out.values.size(); ++i)
        if (labels.values[i] == id) out.values[i] = assignment[cc.ids.values[i] - 1];
}

} // namespace

LabelVolume lateralize(const LabelVolume& labels, const LabelTable& table, bool restore_sagittal) {
    // Ids needing a hemisphere decision: MergedPair entries always; shared
    // sagittal ids of lateral pairs only when restoring a merged volume.
    std::map<std::uint16_t, LateralTarget> mergeable;
    for (const auto& e : table.entries()) {
        if (e.laterality == Laterality::MergedPair)
            mergeable[e.internal_id] = {std::uint16_t(e.fs_code_left()),
                                        std::uint16_t(e.fs_code_right())};
    }
    if (restore_sagittal) {
        for (std::uint16_t id : table.sagittal_class_ids())
            if (auto pair = table.lateral_pair_of(id)) mergeable[id] = {pair->left, pair->right};
    }

    bool any_present = false;
    for (auto v : labels.values)
        if (v != 0 && mergeable.count(v)) {
            any_present = true;
            break;
        }
    if (!any_present) return labels;

    const auto* wm_left = table.white_matter(Laterality::Left);
    const auto* wm_right = table.white_matter(Laterality::Right);
    if (!wm_left || !wm_right)
        throw MissingWhiteMatter("label table lacks cerebral WM entries (fs codes 2/41)");

    LabelVolume out = labels;

    // The WM pair itself is sagittal-merged, so in restore mode its clusters
    // must be split before any centroid is available: clusters left of the
    // label's overall x centroid become left WM (x is the lateral axis).
    if (restore_sagittal) {
        const std::uint16_t wm_shared = table.sagittal_id(wm_left->internal_id);
        auto it = mergeable.find(wm_shared);
        bool shared_present = false, right_present = false;
        for (auto v : labels.values) {
            shared_present |= v == wm_shared;
            right_present |= v == wm_right->internal_id;
        }
        if (it != mergeable.end() && shared_present && !right_present) {
            Centroid overall;
            const int nx = int(labels.header.dims[0]), ny = int(labels.header.dims[1]),
                      nz = int(labels.header.dims[2]);
            for (int z = 0; z < nz; ++z)
                for (int y = 0; y < ny; ++y)
                    for (int x = 0; x < nx; ++x)
                        if (labels.at(x, y, z) == wm_shared)
                            overall.add(labels.voxel_center_mm(x, y, z));
            const double mid_x = overall.x / double(overall.n);
            assign_clusters(out, labels, wm_shared, [&](const Centroid& c) {
                return c.x / double(c.n) <= mid_x ? it->second.left : it->second.right;
            });
            mergeable.erase(it);
        }
    }

    const int nx = int(out.header.dims[0]), ny = int(out.header.dims[1]),
              nz = int(out.header.dims[2]);
    Centroid left, right;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                const std::uint16_t id = out.at(x, y, z);
                if (id == wm_left->internal_id) left.add(out.voxel_center_mm(x, y, z));
                else if (id == wm_right->internal_id) right.add(out.voxel_center_mm(x, y, z));
            }
    if (left.n == 0) throw MissingWhiteMatter("no left WM voxels in volume");
    if (right.n == 0) throw MissingWhiteMatter("no right WM voxels in volume");

    const LabelVolume after_wm = out;
    for (const auto& [id, target] : mergeable) {
        assign_clusters(out, after_wm, id, [&, target = target, id = id](const Centroid& c) {
            const double dl = c.dist2(left), dr = c.dist2(right);
            if (dl == dr)
                log::info("lateralize: a cluster of label ", id,
                          " is equidistant to the WM centroids, assigning Left");
            return dl <= dr ? target.left : target.right;
        });
    }
    return out;
}

LabelVolume merge_sagittal(const LabelVolume& labels, const LabelTable& table) {
    LabelVolume out = labels;
    std::map<std::uint16_t, std::uint16_t> mapped;
    for (auto& v : out.values) {
        if (v == 0) continue;
        auto it = mapped.find(v);
        if (it == mapped.end()) {
            std::uint16_t target = table.sagittal_id(v);
            if (!table.contains(v))
                log::warn("merge_sagittal: id ", v, " missing from label table, left unchanged");
            it = mapped.emplace(v, target).first;
        }
        v = it->second;
    }
    return out;
}

} // namespace cortexkit::voxelgrid
