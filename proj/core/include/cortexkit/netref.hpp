// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cortexkit/label_table.hpp"
#include "cortexkit/types.hpp"

namespace cortexkit::netref {

/// H x W x C feature map, channel fastest.
struct FeatureMap {
    int h = 0, w = 0, c = 0;
    std::vector<double> values;

    FeatureMap() = default;
    FeatureMap(int h_, int w_, int c_, double fill = 0.0)
        : h(h_), w(w_), c(c_), values(std::size_t(h_) * w_ * c_, fill) {}

    std::size_t index(int i, int j, int k) const { return (std::size_t(i) * w + j) * c + k; }
    double& at(int i, int j, int k) { return values[index(i, j, k)]; }
    double at(int i, int j, int k) const { return values[index(i, j, k)]; }
    bool same_shape(const FeatureMap& o) const { return h == o.h && w == o.w && c == o.c; }
};

/// Per-channel batch-norm statistics, applied in inference form
/// y = scale * (x - mean) / sqrt(var) + shift (running var must be > 0).
struct BnParams {
    std::vector<double> scale, shift, running_mean, running_var;
    static BnParams identity(int channels);
};

/// One composite unit H_j: PReLU -> same-padded conv (no bias) -> BN.
/// When input_bn is set (first encoder block), the PReLU is replaced by a
/// batch norm over the raw inputs.
struct CompositeUnit {
    int kernel = 5;
    int c_in = 0, c_out = 0;
    std::vector<double> weights;       // [ky][kx][c_in][c_out]
    std::vector<double> prelu_slope;   // per input channel
    BnParams bn;                       // over output channels
    std::optional<BnParams> input_bn;

    std::size_t weight_index(int ky, int kx, int ci, int co) const {
        return ((std::size_t(ky) * kernel + kx) * c_in + ci) * c_out + co;
    }
};

struct BlockWeights {
    CompositeUnit h1, h2, h3;
};

FeatureMap composite_forward(const FeatureMap& x, const CompositeUnit& unit);

/// Elementwise maximum over equally shaped maps.
FeatureMap maxout(const std::vector<FeatureMap>& inputs);

FeatureMap concat_channels(const std::vector<FeatureMap>& inputs);

/// y1 = [H1(x), x]; y2 = [H2(y1), H1(x), x]; out = H3(y2).
FeatureMap dense_block_forward(const FeatureMap& x, const BlockWeights& w);

/// y1 = maxout(H1(x), x); y2 = maxout(H2(y1), y1); out = H3(y2).
/// Channel counts stay constant throughout. In the first block H1 carries
/// an input BN instead of the PReLU.
FeatureMap competitive_block_forward(const FeatureMap& x, const BlockWeights& w, bool first_block);

enum class BlockVariant { Dense, Competitive };

struct BlockConfig {
    std::vector<int> block_widths; // channel width per encoder/decoder block
    int kernel = 5;
};

std::size_t conv_weight_count(int kernel, int c_in, int c_out);
/// Learnables (conv kernels + PReLU slopes + BN scale/shift) over all blocks.
std::size_t count_params(const BlockConfig& config, BlockVariant variant);

/// Deterministic random weights for a competitive/dense unit chain.
BlockWeights make_seeded_weights(int channels, int kernel, BlockVariant variant,
                                 std::uint64_t seed, bool first_block = false);

/// 7-channel stack of slices [i-3 .. i+3] perpendicular to `axis`; the
/// remaining axes keep their order as (h, w). Out-of-range neighbors clamp
/// to the edge slice.
struct SliceStack {
    FeatureMap channels; // c == 7
    int center_index = 0;
};
SliceStack stack_slices(const FloatVolume& volume, int axis, int index);

/// Per-voxel class probabilities, one scalar volume per class.
/// class_ids[k] is the internal id of plane k (0 = background).
/// Held in double in memory; exchanged on disk as F32 FSLV files.
struct ProbStack {
    VolumeHeader header;
    std::vector<std::uint16_t> class_ids;
    std::vector<std::vector<double>> planes;

    int classes() const { return int(class_ids.size()); }
};

struct ViewWeights {
    double coronal = 1.0, axial = 1.0, sagittal = 0.5;
};

struct ViewAggregate {
    LabelVolume labels;
    ProbStack probs;
};

/// Weighted per-voxel average of the three view probabilities. A sagittal
/// stack given in merged (sagittal id) classes is first expanded by copying
/// each merged class's mass to both lateral classes; the average is then
/// renormalized per voxel.
ViewAggregate view_aggregate(const ProbStack& coronal, const ProbStack& axial,
                             const ProbStack& sagittal, const LabelTable& table,
                             const ViewWeights& weights);

struct ClassWeights {
    std::vector<double> weights;
};

/// w_c = median(present frequencies) / f_c; absent classes get the largest
/// finite weight among present ones (logged).
ClassWeights median_frequency_weights(const std::vector<double>& frequency);

/// Median-frequency-weighted cross entropy plus (1 - soft Dice), both
/// averaged over pixels/classes. pred rows must sum to 1 (+-1e-5); logs are
/// clamped at 1e-12; Dice uses eps 1e-7 per class and skips classes absent
/// from both pred and target.
double composite_loss(const std::vector<std::vector<double>>& pred,
                      const std::vector<int>& target, const ClassWeights& weights);

// FSLV exchange of probability stacks, one F32 file per class:
// <basename>.class<k>.fslv
void write_prob_stack(const ProbStack& stack, const std::string& basename);
ProbStack read_prob_stack(const std::string& basename, const std::vector<std::uint16_t>& class_ids);

} // namespace cortexkit::netref
