// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cortexkit::testsupport {

namespace {

std::vector<std::array<double, 3>> mask_points_mm(const BinaryMask& m) {
    std::vector<std::array<double, 3>> pts;
    for (int z = 0; z < int(m.header.dims[2]); ++z)
        for (int y = 0; y < int(m.header.dims[1]); ++y)
            for (int x = 0; x < int(m.header.dims[0]); ++x)
                if (m.at(x, y, z)) pts.push_back(m.voxel_center_mm(x, y, z));
    return pts;
}

double directed_mean(const std::vector<std::array<double, 3>>& from,
                     const std::vector<std::array<double, 3>>& to) {
    double sum = 0;
    for (const auto& a : from) {
        double best = std::numeric_limits<double>::max();
        for (const auto& b : to) {
            const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
            best = std::min(best, dx * dx + dy * dy + dz * dz);
        }
        sum += std::sqrt(best);
    }
    return sum / double(from.size());
}

} // namespace

double brute_force_avg_hd(const BinaryMask& g, const BinaryMask& p) {
    const auto gs = mask_points_mm(g), ps = mask_points_mm(p);
    if (gs.empty() || ps.empty()) throw std::invalid_argument("empty mask in oracle");
    return directed_mean(gs, ps) + directed_mean(ps, gs);
}

double brute_force_dice(const BinaryMask& g, const BinaryMask& p) {
    std::size_t ng = 0, np = 0, nb = 0;
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        ng += g.values[i] != 0;
        np += p.values[i] != 0;
        nb += g.values[i] != 0 && p.values[i] != 0;
    }
    if (ng + np == 0) return 1.0;
    return 2.0 * double(nb) / double(ng + np);
}

namespace {

bool oracle_neighbor(int dx, int dy, int dz, int connectivity_neighbors) {
    const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
    if (manhattan == 0) return false;
    if (connectivity_neighbors == 6) return manhattan == 1;
    if (connectivity_neighbors == 18) return manhattan <= 2;
    return true; // 26
}

} // namespace

BinaryMask brute_force_dilate(const BinaryMask& mask, int radius, int connectivity_neighbors) {
    BinaryMask out = mask;
    for (int pass = 0; pass < radius; ++pass) {
        BinaryMask prev = out;
        for (int z = 0; z < int(mask.header.dims[2]); ++z)
            for (int y = 0; y < int(mask.header.dims[1]); ++y)
                for (int x = 0; x < int(mask.header.dims[0]); ++x) {
                    bool hit = prev.at(x, y, z) != 0;
                    for (int dz = -1; dz <= 1 && !hit; ++dz)
                        for (int dy = -1; dy <= 1 && !hit; ++dy)
                            for (int dx = -1; dx <= 1 && !hit; ++dx) {
                                if (!oracle_neighbor(dx, dy, dz, connectivity_neighbors)) continue;
                                const int px = x + dx, py = y + dy, pz = z + dz;
                                hit = prev.in_bounds(px, py, pz) && prev.at(px, py, pz);
                            }
                    out.at(x, y, z) = hit;
                }
    }
    return out;
}

BinaryMask brute_force_erode(const BinaryMask& mask, int radius, int connectivity_neighbors) {
    BinaryMask out = mask;
    for (int pass = 0; pass < radius; ++pass) {
        BinaryMask prev = out;
        for (int z = 0; z < int(mask.header.dims[2]); ++z)
            for (int y = 0; y < int(mask.header.dims[1]); ++y)
                for (int x = 0; x < int(mask.header.dims[0]); ++x) {
                    bool keep = prev.at(x, y, z) != 0;
                    for (int dz = -1; dz <= 1 && keep; ++dz)
                        for (int dy = -1; dy <= 1 && keep; ++dy)
                            for (int dx = -1; dx <= 1 && keep; ++dx) {
                                if (!oracle_neighbor(dx, dy, dz, connectivity_neighbors)) continue;
                                const int px = x + dx, py = y + dy, pz = z + dz;
                                keep = prev.in_bounds(px, py, pz) && prev.at(px, py, pz);
                            }
                    out.at(x, y, z) = keep;
                }
    }
    return out;
}

netref::FeatureMap oracle_composite(const netref::FeatureMap& x, const netref::CompositeUnit& unit) {
    using netref::FeatureMap;

    // activation
    FeatureMap act(x.h, x.w, x.c);
    if (unit.input_bn) {
        const auto& bn = *unit.input_bn;
        for (int i = 0; i < x.h; ++i)
            for (int j = 0; j < x.w; ++j)
                for (int k = 0; k < x.c; ++k)
                    act.at(i, j, k) = bn.scale[std::size_t(k)] *
                                          (x.at(i, j, k) - bn.running_mean[std::size_t(k)]) /
                                          std::sqrt(bn.running_var[std::size_t(k)]) +
                                      bn.shift[std::size_t(k)];
    } else {
        for (int i = 0; i < x.h; ++i)
            for (int j = 0; j < x.w; ++j)
                for (int k = 0; k < x.c; ++k) {
                    const double v = x.at(i, j, k);
                    act.at(i, j, k) = v > 0 ? v : unit.prelu_slope[std::size_t(k)] * v;
                }
    }

    // convolution over an explicitly zero-padded buffer
    const int r = unit.kernel / 2;
    FeatureMap padded(x.h + 2 * r, x.w + 2 * r, x.c);
    for (int i = 0; i < x.h; ++i)
        for (int j = 0; j < x.w; ++j)
            for (int k = 0; k < x.c; ++k) padded.at(i + r, j + r, k) = act.at(i, j, k);

    FeatureMap out(x.h, x.w, unit.c_out);
    for (int i = 0; i < x.h; ++i)
        for (int j = 0; j < x.w; ++j)
            for (int co = 0; co < unit.c_out; ++co) {
                double acc = 0;
                for (int ky = 0; ky < unit.kernel; ++ky)
                    for (int kx = 0; kx < unit.kernel; ++kx)
                        for (int ci = 0; ci < x.c; ++ci)
                            acc += padded.at(i + ky, j + kx, ci) *
                                   unit.weights[unit.weight_index(ky, kx, ci, co)];
                out.at(i, j, co) = acc;
            }

    for (int i = 0; i < x.h; ++i)
        for (int j = 0; j < x.w; ++j)
            for (int k = 0; k < unit.c_out; ++k)
                out.at(i, j, k) = unit.bn.scale[std::size_t(k)] *
                                      (out.at(i, j, k) - unit.bn.running_mean[std::size_t(k)]) /
                                      std::sqrt(unit.bn.running_var[std::size_t(k)]) +
                                  unit.bn.shift[std::size_t(k)];
    return out;
}

namespace {

netref::FeatureMap oracle_concat(const std::vector<netref::FeatureMap>& maps) {
    int c = 0;
    for (const auto& m : maps) c += m.c;
    netref::FeatureMap out(maps[0].h, maps[0].w, c);
    for (int i = 0; i < out.h; ++i)
        for (int j = 0; j < out.w; ++j) {
            int k = 0;
            for (const auto& m : maps)
                for (int mk = 0; mk < m.c; ++mk) out.at(i, j, k++) = m.at(i, j, mk);
        }
    return out;
}

netref::FeatureMap oracle_maxout2(const netref::FeatureMap& a, const netref::FeatureMap& b) {
    netref::FeatureMap out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = std::max(out.values[i], b.values[i]);
    return out;
}

} // namespace

netref::FeatureMap oracle_dense_block(const netref::FeatureMap& x, const netref::BlockWeights& w) {
    const auto h1 = oracle_composite(x, w.h1);
    const auto y1 = oracle_concat({h1, x});
    const auto h2 = oracle_composite(y1, w.h2);
    const auto y2 = oracle_concat({h2, h1, x});
    return oracle_composite(y2, w.h3);
}

netref::FeatureMap oracle_competitive_block(const netref::FeatureMap& x,
                                            const netref::BlockWeights& w, bool first_block) {
    auto h1 = w.h1;
    if (!first_block) h1.input_bn.reset();
    const auto a = oracle_composite(x, h1);
    const auto y1 = oracle_maxout2(a, x);
    const auto b = oracle_composite(y1, w.h2);
    const auto y2 = oracle_maxout2(b, y1);
    return oracle_composite(y2, w.h3);
}

double wilcoxon_exact_p(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> diffs;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] != y[i]) diffs.push_back(x[i] - y[i]);
    const std::size_t n = diffs.size();
    if (n == 0 || n > 20) throw std::invalid_argument("enumeration oracle needs 1..20 pairs");

    std::vector<double> mags(n);
    for (std::size_t i = 0; i < n; ++i) mags[i] = std::abs(diffs[i]);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return mags[a] < mags[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && mags[order[j + 1]] == mags[order[i]]) ++j;
        const double avg = 0.5 * double(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }

    double total = 0;
    for (double r : ranks) total += r;
    double observed_plus = 0;
    for (std::size_t d = 0; d < n; ++d)
        if (diffs[d] > 0) observed_plus += ranks[d];
    const double observed_w = std::min(observed_plus, total - observed_plus);

    // condition on the observed ranks, enumerate all sign assignments
    std::size_t at_or_below = 0;
    const std::size_t patterns = std::size_t(1) << n;
    for (std::size_t bits = 0; bits < patterns; ++bits) {
        double t_plus = 0;
        for (std::size_t d = 0; d < n; ++d)
            if (bits & (std::size_t(1) << d)) t_plus += ranks[d];
        if (std::min(t_plus, total - t_plus) <= observed_w + 1e-12) ++at_or_below;
    }
    return double(at_or_below) / double(patterns);
}

double ks_uniform_statistic(std::vector<double> samples) {
    std::sort(samples.begin(), samples.end());
    const double n = double(samples.size());
    double ks = 0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const double lo = double(k) / n, hi = double(k + 1) / n;
        ks = std::max({ks, std::abs(samples[k] - lo), std::abs(samples[k] - hi)});
    }
    return ks;
}

} // namespace cortexkit::testsupport
