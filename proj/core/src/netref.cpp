// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "cortexkit/netref.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cortexkit/io.hpp"
#include "cortexkit/log.hpp"

namespace cortexkit::netref {

namespace {

void require_finite(const FeatureMap& x, const char* what) {
    for (double v : x.values)
        if (!std::isfinite(v)) throw ShapeMismatch(std::string(what) + ": non-finite value");
}

std::vector<double> apply_bn(const std::vector<double>& x, int h, int w, int c,
                             const BnParams& bn) {
    std::vector<double> out(x.size());
    std::vector<double> inv_sd(static_cast<std::size_t>(c));
    for (int k = 0; k < c; ++k) {
        if (!(bn.running_var[std::size_t(k)] > 0))
            throw ShapeMismatch("batch norm running variance must be positive");
        inv_sd[std::size_t(k)] = 1.0 / std::sqrt(bn.running_var[std::size_t(k)]);
    }
    std::size_t idx = 0;
    for (int i = 0; i < h * w; ++i)
        for (int k = 0; k < c; ++k, ++idx)
            out[idx] = bn.scale[std::size_t(k)] * (x[idx] - bn.running_mean[std::size_t(k)]) *
                           inv_sd[std::size_t(k)] +
                       bn.shift[std::size_t(k)];
    return out;
}

std::vector<double> apply_prelu(const std::vector<double>& x, int h, int w, int c,
                                const std::vector<double>& slope) {
    std::vector<double> out(x.size());
    std::size_t idx = 0;
    for (int i = 0; i < h * w; ++i)
        for (int k = 0; k < c; ++k, ++idx)
            out[idx] = x[idx] > 0 ? x[idx] : slope[std::size_t(k)] * x[idx];
    return out;
}

} // namespace

BnParams BnParams::identity(int channels) {
    BnParams bn;
    bn.scale.assign(std::size_t(channels), 1.0);
    bn.shift.assign(std::size_t(channels), 0.0);
    bn.running_mean.assign(std::size_t(channels), 0.0);
    bn.running_var.assign(std::size_t(channels), 1.0);
    return bn;
}

FeatureMap composite_forward(const FeatureMap& x, const CompositeUnit& unit) {
    if (x.c != unit.c_in)
        throw ShapeMismatch("composite unit expects " + std::to_string(unit.c_in) +
                            " channels, got " + std::to_string(x.c));
    if (unit.kernel % 2 == 0) throw ShapeMismatch("kernel size must be odd");

    std::vector<double> act;
    if (unit.input_bn)
        act = apply_bn(x.values, x.h, x.w, x.c, *unit.input_bn);
    else
        act = apply_prelu(x.values, x.h, x.w, x.c, unit.prelu_slope);

    // same-padded, stride-1, zero-border convolution, no bias
    FeatureMap conv(x.h, x.w, unit.c_out);
    const int r = unit.kernel / 2;
    for (int i = 0; i < x.h; ++i)
        for (int j = 0; j < x.w; ++j)
            for (int ky = 0; ky < unit.kernel; ++ky) {
                const int si = i + ky - r;
                if (si < 0 || si >= x.h) continue;
                for (int kx = 0; kx < unit.kernel; ++kx) {
                    const int sj = j + kx - r;
                    if (sj < 0 || sj >= x.w) continue;
                    const std::size_t src = (std::size_t(si) * x.w + sj) * std::size_t(x.c);
                    for (int ci = 0; ci < x.c; ++ci) {
                        const double v = act[src + std::size_t(ci)];
                        if (v == 0.0) continue;
                        const std::size_t wbase = unit.weight_index(ky, kx, ci, 0);
                        for (int co = 0; co < unit.c_out; ++co)
                            conv.at(i, j, co) += v * unit.weights[wbase + std::size_t(co)];
                    }
                }
            }

    conv.values = apply_bn(conv.values, conv.h, conv.w, conv.c, unit.bn);
    return conv;
}

FeatureMap maxout(const std::vector<FeatureMap>& inputs) {
    if (inputs.empty()) throw ShapeMismatch("maxout of empty input list");
    FeatureMap out = inputs.front();
    for (std::size_t l = 1; l < inputs.size(); ++l) {
        if (!inputs[l].same_shape(out))
            throw ShapeMismatch("maxout inputs must share (h,w,c)");
        for (std::size_t i = 0; i < out.values.size(); ++i)
            out.values[i] = std::max(out.values[i], inputs[l].values[i]);
    }
    return out;
}

FeatureMap concat_channels(const std::vector<FeatureMap>& inputs) {
    if (inputs.empty()) throw ShapeMismatch("concat of empty input list");
    int c = 0;
    for (const auto& in : inputs) {
        if (in.h != inputs[0].h || in.w != inputs[0].w)
            throw ShapeMismatch("concat inputs must share (h,w)");
        c += in.c;
    }
    FeatureMap out(inputs[0].h, inputs[0].w, c);
    for (int i = 0; i < out.h; ++i)
        for (int j = 0; j < out.w; ++j) {
            int k = 0;
            for (const auto& in : inputs)
                for (int ck = 0; ck < in.c; ++ck) out.at(i, j, k++) = in.at(i, j, ck);
        }
    return out;
}

FeatureMap dense_block_forward(const FeatureMap& x, const BlockWeights& w) {
    require_finite(x, "dense block input");
    FeatureMap h1 = composite_forward(x, w.h1);
    FeatureMap y1 = concat_channels({h1, x});
    FeatureMap h2 = composite_forward(y1, w.h2);
    FeatureMap y2 = concat_channels({h2, h1, x});
    return composite_forward(y2, w.h3);
}

FeatureMap competitive_block_forward(const FeatureMap& x, const BlockWeights& w,
                                     bool first_block) {
    require_finite(x, "competitive block input");
    CompositeUnit h1 = w.h1;
    if (first_block && !h1.input_bn)
        throw ShapeMismatch("first block requires input batch-norm parameters");
    if (!first_block) h1.input_bn.reset();

    FeatureMap a = composite_forward(x, h1);
    FeatureMap y1 = maxout({a, x});
    FeatureMap b = composite_forward(y1, w.h2);
    FeatureMap y2 = maxout({b, y1});
    return composite_forward(y2, w.h3);
}

std::size_t conv_weight_count(int kernel, int c_in, int c_out) {
    return std::size_t(kernel) * std::size_t(kernel) * std::size_t(c_in) * std::size_t(c_out);
}

std::size_t count_params(const BlockConfig& config, BlockVariant variant) {
    std::size_t total = 0;
    for (int c : config.block_widths) {
        const auto cu = std::size_t(c);
        if (variant == BlockVariant::Competitive) {
            // three units, each C -> C
            total += 3 * conv_weight_count(config.kernel, c, c); // kernels
            total += 3 * cu;                                     // PReLU slopes
            total += 3 * 2 * cu;                                 // BN scale+shift
        } else {
            // inputs grow C, 2C, 3C through the concatenations
            total += conv_weight_count(config.kernel, c, c) +
                     conv_weight_count(config.kernel, 2 * c, c) +
                     conv_weight_count(config.kernel, 3 * c, c);
            total += cu + 2 * cu + 3 * cu; // PReLU slopes per input channel
            total += 3 * 2 * cu;           // BN scale+shift
        }
    }
    return total;
}

BlockWeights make_seeded_weights(int channels, int kernel, BlockVariant variant,
                                 std::uint64_t seed, bool first_block) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 0.25);
    std::uniform_real_distribution<double> slope(0.0, 0.3);
    std::uniform_real_distribution<double> var(0.5, 1.5);

    auto make_bn = [&](int c) {
        BnParams bn = BnParams::identity(c);
        for (auto& v : bn.scale) v = 1.0 + gauss(rng) * 0.1;
        for (auto& v : bn.shift) v = gauss(rng) * 0.1;
        for (auto& v : bn.running_mean) v = gauss(rng) * 0.1;
        for (auto& v : bn.running_var) v = var(rng);
        return bn;
    };
    auto make_unit = [&](int c_in, int c_out) {
        CompositeUnit u;
        u.kernel = kernel;
        u.c_in = c_in;
        u.c_out = c_out;
        u.weights.resize(conv_weight_count(kernel, c_in, c_out));
        for (auto& w : u.weights) w = gauss(rng) / std::sqrt(double(kernel * kernel * c_in));
        u.prelu_slope.resize(std::size_t(c_in));
        for (auto& s : u.prelu_slope) s = slope(rng);
        u.bn = make_bn(c_out);
        return u;
    };

    BlockWeights w;
    if (variant == BlockVariant::Competitive) {
        w.h1 = make_unit(channels, channels);
        w.h2 = make_unit(channels, channels);
        w.h3 = make_unit(channels, channels);
    } else {
        w.h1 = make_unit(channels, channels);
        w.h2 = make_unit(2 * channels, channels);
        w.h3 = make_unit(3 * channels, channels);
    }
    if (first_block) w.h1.input_bn = make_bn(channels);
    return w;
}

SliceStack stack_slices(const FloatVolume& volume, int axis, int index) {
    if (axis < 0 || axis > 2) throw ShapeMismatch("axis must be 0, 1, or 2");
    const int n = int(volume.header.dims[std::size_t(axis)]);
    if (n < 1 || index < 0 || index >= n) throw ShapeMismatch("slice index out of range");

    const int a1 = axis == 0 ? 1 : 0;            // first remaining axis
    const int a2 = axis == 2 ? 1 : 2;            // second remaining axis
    const int h = int(volume.header.dims[std::size_t(a1)]);
    const int w = int(volume.header.dims[std::size_t(a2)]);

    SliceStack stack;
    stack.center_index = index;
    stack.channels = FeatureMap(h, w, 7);
    for (int k = 0; k < 7; ++k) {
        const int s = std::clamp(index + k - 3, 0, n - 1); // clamp boundary policy
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                int xyz[3];
                xyz[axis] = s;
                xyz[a1] = i;
                xyz[a2] = j;
                stack.channels.at(i, j, k) = volume.at(xyz[0], xyz[1], xyz[2]);
            }
    }
    return stack;
}

namespace {

void check_stack(const ProbStack& s, const char* name) {
    const std::size_t n = s.header.voxel_count();
    if (s.planes.size() != s.class_ids.size())
        throw ShapeMismatch(std::string(name) + ": class plane count mismatch");
    for (const auto& plane : s.planes)
        if (plane.size() != n) throw ShapeMismatch(std::string(name) + ": plane size mismatch");
    for (std::size_t v = 0; v < n; ++v) {
        double sum = 0;
        for (const auto& plane : s.planes) sum += plane[v];
        if (std::abs(sum - 1.0) > 1e-5)
            throw ProbNotNormalized(std::string(name) + ": voxel " + std::to_string(v) +
                                    " probabilities sum to " + std::to_string(sum));
    }
}

} // namespace

ViewAggregate view_aggregate(const ProbStack& coronal, const ProbStack& axial,
                             const ProbStack& sagittal, const LabelTable& table,
                             const ViewWeights& weights) {
    if (!(weights.coronal >= 0 && weights.axial >= 0 && weights.sagittal >= 0) ||
        weights.coronal + weights.axial + weights.sagittal <= 0)
        throw ShapeMismatch("view weights must be nonnegative and not all zero");
    if (axial.header != coronal.header || sagittal.header != coronal.header)
        throw ShapeMismatch("view stacks must share the volume grid");
    if (axial.class_ids != coronal.class_ids)
        throw ShapeMismatch("coronal/axial class lists differ");
    check_stack(coronal, "coronal");
    check_stack(axial, "axial");
    check_stack(sagittal, "sagittal");

    const auto& full_ids = coronal.class_ids;
    const std::size_t n = coronal.header.voxel_count();

    // Map each full class onto its sagittal plane. A sagittal stack already
    // in the full class space passes through unchanged.
    std::vector<int> sag_plane(full_ids.size(), -1);
    const bool expanded = sagittal.class_ids == full_ids;
    for (std::size_t c = 0; c < full_ids.size(); ++c) {
        const std::uint16_t want =
            expanded ? full_ids[c]
                     : (full_ids[c] == 0 ? std::uint16_t(0) : table.sagittal_id(full_ids[c]));
        for (std::size_t s = 0; s < sagittal.class_ids.size(); ++s)
            if (sagittal.class_ids[s] == want) {
                sag_plane[c] = int(s);
                break;
            }
        if (sag_plane[c] < 0)
            throw ShapeMismatch("sagittal stack lacks class " + std::to_string(want));
    }

    const double wc = weights.coronal, wa = weights.axial, ws = weights.sagittal;
    const double wsum = wc + wa + ws;

    ViewAggregate out;
    out.probs.header = coronal.header;
    out.probs.class_ids = full_ids;
    out.probs.planes.assign(full_ids.size(), std::vector<double>(n, 0.0));
    out.labels = LabelVolume(coronal.header, 0);
    out.labels.header.dtype = Dtype::U16;

    std::vector<double> mixed(full_ids.size());
    for (std::size_t v = 0; v < n; ++v) {
        double total = 0;
        for (std::size_t c = 0; c < full_ids.size(); ++c) {
            const double sag = sagittal.planes[std::size_t(sag_plane[c])][v];
            mixed[c] = (wc * coronal.planes[c][v] + wa * axial.planes[c][v] + ws * sag) / wsum;
            total += mixed[c];
        }
        std::size_t best = 0;
        for (std::size_t c = 0; c < full_ids.size(); ++c) {
            out.probs.planes[c][v] = mixed[c] / total;
            if (mixed[c] > mixed[best]) best = c;
        }
        out.labels.values[v] = full_ids[best];
    }
    return out;
}

ClassWeights median_frequency_weights(const std::vector<double>& frequency) {
    std::vector<double> present;
    for (double f : frequency) {
        if (f < 0) throw ShapeMismatch("negative class frequency");
        if (f > 0) present.push_back(f);
    }
    if (present.empty()) throw ShapeMismatch("all class frequencies are zero");
    std::sort(present.begin(), present.end());
    const std::size_t m = present.size();
    const double median =
        m % 2 ? present[m / 2] : 0.5 * (present[m / 2 - 1] + present[m / 2]);

    ClassWeights cw;
    cw.weights.resize(frequency.size());
    double max_weight = 0;
    for (std::size_t c = 0; c < frequency.size(); ++c)
        if (frequency[c] > 0) {
            cw.weights[c] = median / frequency[c];
            max_weight = std::max(max_weight, cw.weights[c]);
        }
    for (std::size_t c = 0; c < frequency.size(); ++c)
        if (frequency[c] == 0) {
            cw.weights[c] = max_weight;
            log::info("median_frequency_weights: class ", c,
                      " absent, assigned max present weight ", max_weight);
        }
    return cw;
}

double composite_loss(const std::vector<std::vector<double>>& pred,
                      const std::vector<int>& target, const ClassWeights& weights) {
    if (pred.size() != target.size()) throw ShapeMismatch("pred/target pixel counts differ");
    if (pred.empty()) throw ShapeMismatch("empty prediction");
    const std::size_t classes = pred[0].size();
    if (weights.weights.size() != classes) throw ShapeMismatch("class weight count mismatch");

    constexpr double kLogEps = 1e-12;
    constexpr double kDiceEps = 1e-7;

    double ce = 0;
    std::vector<double> inter(classes, 0), psum(classes, 0), gsum(classes, 0);
    for (std::size_t px = 0; px < pred.size(); ++px) {
        const auto& row = pred[px];
        if (row.size() != classes) throw ShapeMismatch("ragged prediction rows");
        double sum = 0;
        for (double p : row) sum += p;
        if (std::abs(sum - 1.0) > 1e-5)
            throw ProbNotNormalized("pred row " + std::to_string(px) + " sums to " +
                                    std::to_string(sum));
        const int g = target[px];
        if (g < 0 || std::size_t(g) >= classes) throw ShapeMismatch("target class out of range");
        ce += -weights.weights[std::size_t(g)] * std::log(std::max(row[std::size_t(g)], kLogEps));
        for (std::size_t c = 0; c < classes; ++c) {
            inter[c] += row[c] * (std::size_t(g) == c ? 1.0 : 0.0);
            psum[c] += row[c];
            gsum[c] += std::size_t(g) == c ? 1.0 : 0.0;
        }
    }
    ce /= double(pred.size());

    double dice_sum = 0;
    int dice_classes = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        if (psum[c] + gsum[c] <= 0) continue; // absent from both, skipped
        dice_sum += 2.0 * inter[c] / (psum[c] + gsum[c] + kDiceEps);
        ++dice_classes;
    }
    const double soft_dice = dice_classes ? dice_sum / dice_classes : 1.0;
    return ce + (1.0 - soft_dice);
}

void write_prob_stack(const ProbStack& stack, const std::string& basename) {
    for (std::size_t c = 0; c < stack.planes.size(); ++c) {
        FloatVolume vol;
        vol.header = stack.header;
        vol.header.dtype = Dtype::F32;
        vol.values.assign(stack.planes[c].begin(), stack.planes[c].end());
        io::write_volume(to_volume(vol), basename + ".class" + std::to_string(c) + ".fslv");
    }
}

ProbStack read_prob_stack(const std::string& basename,
                          const std::vector<std::uint16_t>& class_ids) {
    ProbStack stack;
    stack.class_ids = class_ids;
    for (std::size_t c = 0; c < class_ids.size(); ++c) {
        auto vol = as_floats(
            io::read_volume(basename + ".class" + std::to_string(c) + ".fslv"));
        if (c == 0)
            stack.header = vol.header;
        else if (!(vol.header == stack.header))
            throw ShapeMismatch("probability planes disagree on the grid");
        stack.planes.emplace_back(vol.values.begin(), vol.values.end());
    }
    return stack;
}

} // namespace cortexkit::netref
