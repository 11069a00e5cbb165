// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "cortexkit/netref.hpp"
#include "support/oracles.hpp"
#include "support/test_meshes.hpp"

using namespace cortexkit;
using namespace cortexkit::netref;

namespace {

FeatureMap random_map(int h, int w, int c, std::mt19937_64& rng) {
    FeatureMap m(h, w, c);
    std::normal_distribution<double> gauss;
    for (auto& v : m.values) v = gauss(rng);
    return m;
}

double max_rel_error(const FeatureMap& a, const FeatureMap& b) {
    REQUIRE(a.same_shape(b));
    double worst = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double scale = std::max({1.0, std::abs(a.values[i]), std::abs(b.values[i])});
        worst = std::max(worst, std::abs(a.values[i] - b.values[i]) / scale);
    }
    return worst;
}

} // namespace

TEST_CASE("maxout basics") {
    std::mt19937_64 rng(1);
    const auto x = random_map(3, 4, 2, rng);

    CHECK(maxout({x}).values == x.values);
    CHECK(maxout({x, x}).values == x.values);

    FeatureMap a(1, 1, 2), b(1, 1, 2);
    a.values = {1.0, -2.0};
    b.values = {0.0, 5.0};
    CHECK(maxout({a, b}).values == std::vector<double>{1.0, 5.0});
}

TEST_CASE("maxout is commutative and associative over input order") {
    std::mt19937_64 rng(2);
    std::vector<FeatureMap> maps;
    for (int i = 0; i < 5; ++i) maps.push_back(random_map(4, 3, 3, rng));
    const auto all_at_once = maxout(maps);

    auto shuffled = maps;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(maxout(shuffled).values == all_at_once.values);

    auto nested = maxout({maxout({shuffled[0], shuffled[1]}),
                          maxout({shuffled[2], shuffled[3], shuffled[4]})});
    CHECK(nested.values == all_at_once.values);
}

TEST_CASE("maxout rejects shape mismatches") {
    std::mt19937_64 rng(3);
    CHECK_THROWS_AS(maxout({random_map(2, 2, 2, rng), random_map(2, 2, 3, rng)}), ShapeMismatch);
    CHECK_THROWS_AS(maxout({}), ShapeMismatch);
}

namespace {

BlockWeights zero_kernel_weights(int channels, int kernel) {
    auto w = make_seeded_weights(channels, kernel, BlockVariant::Competitive, 0);
    for (auto* unit : {&w.h1, &w.h2, &w.h3}) {
        std::fill(unit->weights.begin(), unit->weights.end(), 0.0);
        std::fill(unit->prelu_slope.begin(), unit->prelu_slope.end(), 0.25);
        unit->bn = BnParams::identity(channels);
    }
    return w;
}

} // namespace

TEST_CASE("dense block: zero kernels give a zero output map") {
    FeatureMap x(8, 8, 4);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> gauss;
    for (auto& v : x.values) v = gauss(rng);

    auto w = make_seeded_weights(4, 3, BlockVariant::Dense, 1);
    for (auto* unit : {&w.h1, &w.h2, &w.h3}) {
        std::fill(unit->weights.begin(), unit->weights.end(), 0.0);
        unit->bn = BnParams::identity(unit->c_out);
    }
    const auto out = dense_block_forward(x, w);
    CHECK(out.h == 8);
    CHECK(out.c == 4);
    for (double v : out.values) CHECK(v == 0.0);
}

TEST_CASE("dense block: concatenation arithmetic (C, 2C, 3C inputs)") {
    std::mt19937_64 rng(5);
    const int c = 3;
    const auto x = random_map(4, 4, c, rng);
    auto w = make_seeded_weights(c, 3, BlockVariant::Dense, 2);
    CHECK(w.h1.c_in == c);
    CHECK(w.h2.c_in == 2 * c); // [H1(x), x]
    CHECK(w.h3.c_in == 3 * c); // [H2(y1), H1(x), x]
    CHECK_NOTHROW(dense_block_forward(x, w));

    // a 4C-input H3 is inconsistent with the concat arithmetic
    auto bad = w;
    bad.h3 = make_seeded_weights(4 * c, 3, BlockVariant::Competitive, 3).h3;
    CHECK_THROWS_AS(dense_block_forward(x, bad), ShapeMismatch);
}

TEST_CASE("competitive block: zero kernels pass nonnegative input through maxout") {
    // H3 is an identity 1x1 conv so y2 = maxout(0, maxout(0, x)) is observable
    FeatureMap x(5, 5, 3);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> pos(0.0, 2.0);
    for (auto& v : x.values) v = pos(rng);

    BlockWeights w = zero_kernel_weights(3, 3);
    w.h3.kernel = 1;
    w.h3.c_in = w.h3.c_out = 3;
    w.h3.weights.assign(9, 0.0);
    for (int k = 0; k < 3; ++k) w.h3.weights[std::size_t(k * 3 + k)] = 1.0; // identity mix
    w.h3.prelu_slope.assign(3, 1.0); // linear
    w.h3.bn = BnParams::identity(3);

    const auto out = competitive_block_forward(x, w, false);
    CHECK(max_rel_error(out, x) == 0.0);
}

TEST_CASE("competitive block preserves channel count on random configs") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> dim(1, 6), chan(1, 5);
    for (int trial = 0; trial < 50; ++trial) {
        const int c = chan(rng);
        const auto x = random_map(dim(rng), dim(rng), c, rng);
        const auto w = make_seeded_weights(c, 3, BlockVariant::Competitive, std::uint64_t(trial),
                                           trial % 2 == 0);
        const auto out = competitive_block_forward(x, w, trial % 2 == 0);
        CHECK(out.c == c);
        CHECK(out.h == x.h);
        CHECK(out.w == x.w);
    }
}

TEST_CASE("forward passes match the scalar-loop oracle") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const int c = 2 + trial % 2;
        const auto x = random_map(4, 4, c, rng);

        const auto wc = make_seeded_weights(c, trial % 2 ? 5 : 3, BlockVariant::Competitive,
                                            100 + std::uint64_t(trial), trial % 3 == 0);
        const bool first = trial % 3 == 0;
        CHECK(max_rel_error(competitive_block_forward(x, wc, first),
                            testsupport::oracle_competitive_block(x, wc, first)) < 1e-6);

        const auto wd = make_seeded_weights(c, 3, BlockVariant::Dense, 200 + std::uint64_t(trial));
        CHECK(max_rel_error(dense_block_forward(x, wd),
                            testsupport::oracle_dense_block(x, wd)) < 1e-6);
    }
}

TEST_CASE("first competitive block needs input batch norm") {
    std::mt19937_64 rng(9);
    const auto x = random_map(3, 3, 2, rng);
    auto w = make_seeded_weights(2, 3, BlockVariant::Competitive, 10, /*first_block=*/false);
    CHECK_THROWS_AS(competitive_block_forward(x, w, true), ShapeMismatch);
}

TEST_CASE("parameter counting") {
    CHECK(conv_weight_count(3, 4, 4) == 144);

    // hand channel trace for one width-64 kernel-5 block:
    //   dense        5^2(64*64 + 128*64 + 192*64) + (64+128+192) + 6*64
    //   competitive  3*5^2*64*64 + 3*64 + 6*64
    const BlockConfig one{{64}, 5};
    CHECK(count_params(one, BlockVariant::Dense) == 25 * (4096 + 8192 + 12288) + 384 + 384);
    CHECK(count_params(one, BlockVariant::Competitive) == 3 * 25 * 4096 + 192 + 384);

    for (int kernel : {3, 5}) {
        for (int width : {16, 32, 64}) {
            BlockConfig config;
            config.kernel = kernel;
            config.block_widths.assign(9, width); // 4 encoders, bottleneck, 4 decoders
            const double ratio = double(count_params(config, BlockVariant::Competitive)) /
                                 double(count_params(config, BlockVariant::Dense));
            CHECK(ratio > 0.45);
            CHECK(ratio < 0.55);
        }
    }
}

TEST_CASE("stack_slices") {
    VolumeHeader h;
    h.dims = {4, 5, 9};
    h.voxel_size_mm = {1.f, 1.f, 1.f};
    h.dtype = Dtype::F32;
    FloatVolume vol(h);
    for (int z = 0; z < 9; ++z)
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 4; ++x) vol.at(x, y, z) = float(100 * z + 10 * y + x);

    SUBCASE("interior index copies slices i-3..i+3") {
        const auto stack = stack_slices(vol, 2, 4);
        CHECK(stack.channels.h == 4);
        CHECK(stack.channels.w == 5);
        CHECK(stack.channels.c == 7);
        for (int k = 0; k < 7; ++k)
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 5; ++j)
                    CHECK(stack.channels.at(i, j, k) == doctest::Approx(vol.at(i, j, 4 + k - 3)));
    }

    SUBCASE("index 0 clamps to the edge slice") {
        const auto stack = stack_slices(vol, 2, 0);
        const int expected_slices[7] = {0, 0, 0, 0, 1, 2, 3};
        for (int k = 0; k < 7; ++k)
            CHECK(stack.channels.at(1, 2, k) == doctest::Approx(vol.at(1, 2, expected_slices[k])));
    }

    SUBCASE("constant volume gives identical channels") {
        FloatVolume flat(h);
        std::fill(flat.values.begin(), flat.values.end(), 3.25f);
        const auto stack = stack_slices(flat, 0, 2);
        for (double v : stack.channels.values) CHECK(v == doctest::Approx(3.25));
    }
}

namespace {

ProbStack one_hot_stack(const VolumeHeader& h, const std::vector<std::uint16_t>& ids,
                        const std::vector<int>& winner_plane) {
    ProbStack s;
    s.header = h;
    s.class_ids = ids;
    s.planes.assign(ids.size(), std::vector<double>(h.voxel_count(), 0.0));
    for (std::size_t v = 0; v < winner_plane.size(); ++v)
        s.planes[std::size_t(winner_plane[v])][v] = 1.0;
    return s;
}

VolumeHeader tiny_header() {
    VolumeHeader h;
    h.dims = {2, 1, 1};
    h.voxel_size_mm = {1.f, 1.f, 1.f};
    h.dtype = Dtype::F32;
    return h;
}

} // namespace

TEST_CASE("view_aggregate") {
    const auto table = testsupport::mini_table();

    SUBCASE("identical full-class views pass through unchanged") {
        const auto h = tiny_header();
        const std::vector<std::uint16_t> ids = {0, 34, 65};
        const auto s = one_hot_stack(h, ids, {1, 2});
        const auto out = view_aggregate(s, s, s, table, {1, 1, 0.5});
        CHECK(out.probs.planes == s.planes);
        CHECK(out.labels.values == std::vector<std::uint16_t>{34, 65});
    }

    SUBCASE("weighted majority: coronal+axial outvote sagittal at (1,1,0.5)") {
        const auto h = tiny_header();
        const std::vector<std::uint16_t> ids = {12, 34};
        const auto a = one_hot_stack(h, ids, {0, 0}); // class 12 everywhere
        const auto b = one_hot_stack(h, ids, {1, 1}); // class 34 everywhere
        const auto out = view_aggregate(a, a, b, table, {1, 1, 0.5});
        // class 12 mass 2/2.5, class 34 mass 0.5/2.5
        CHECK(out.probs.planes[0][0] == doctest::Approx(0.8));
        CHECK(out.probs.planes[1][0] == doctest::Approx(0.2));
        CHECK(out.labels.values[0] == 12);
    }

    SUBCASE("sagittal 50-class stack is expanded by copying merged mass") {
        const auto h = tiny_header();
        const std::vector<std::uint16_t> full = {0, 34, 65}; // 34/65 share sagittal id 34
        const std::vector<std::uint16_t> merged = {0, 34};
        const auto cor = one_hot_stack(h, full, {0, 0}); // background
        const auto sag = one_hot_stack(h, merged, {1, 1}); // merged class
        const auto out = view_aggregate(cor, cor, sag, table, {1, 1, 1});
        // mixed (pre-normalization): bg 2/3, lh 1/3, rh 1/3 -> total 4/3
        CHECK(out.probs.planes[0][0] == doctest::Approx(0.5));
        CHECK(out.probs.planes[1][0] == doctest::Approx(0.25));
        CHECK(out.probs.planes[2][0] == doctest::Approx(0.25));
        double sum = 0;
        for (const auto& plane : out.probs.planes) sum += plane[0];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }

    SUBCASE("scaling all weights leaves probabilities and argmax unchanged") {
        const auto h = tiny_header();
        const std::vector<std::uint16_t> ids = {0, 34, 65};
        ProbStack s;
        s.header = h;
        s.class_ids = ids;
        s.planes = {{0.2, 0.5}, {0.5, 0.3}, {0.3, 0.2}};
        const auto base = view_aggregate(s, s, s, table, {1, 1, 0.5});
        const auto scaled = view_aggregate(s, s, s, table, {7, 7, 3.5});
        CHECK(base.labels.values == scaled.labels.values);
        for (std::size_t c = 0; c < base.probs.planes.size(); ++c)
            for (std::size_t v = 0; v < base.probs.planes[c].size(); ++v)
                CHECK(base.probs.planes[c][v] ==
                      doctest::Approx(scaled.probs.planes[c][v]).epsilon(1e-12));
    }

    SUBCASE("output probabilities sum to one at every voxel") {
        VolumeHeader h;
        h.dims = {4, 3, 2};
        h.voxel_size_mm = {1.f, 1.f, 1.f};
        h.dtype = Dtype::F32;
        std::mt19937_64 rng(31);
        std::uniform_real_distribution<double> unit(0.05, 1.0);
        auto random_stack = [&](const std::vector<std::uint16_t>& ids) {
            ProbStack s;
            s.header = h;
            s.class_ids = ids;
            s.planes.assign(ids.size(), std::vector<double>(h.voxel_count()));
            for (std::size_t v = 0; v < h.voxel_count(); ++v) {
                double total = 0;
                for (auto& plane : s.planes) {
                    plane[v] = unit(rng);
                    total += plane[v];
                }
                for (auto& plane : s.planes) plane[v] /= total;
            }
            return s;
        };
        const std::vector<std::uint16_t> full = {0, 34, 65, 12};
        const std::vector<std::uint16_t> merged = {0, 34, 12};
        const auto out = view_aggregate(random_stack(full), random_stack(full),
                                        random_stack(merged), table, {1, 1, 0.5});
        for (std::size_t v = 0; v < h.voxel_count(); ++v) {
            double sum = 0;
            for (const auto& plane : out.probs.planes) sum += plane[v];
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
    }

    SUBCASE("unnormalized probabilities are rejected") {
        const auto h = tiny_header();
        ProbStack s;
        s.header = h;
        s.class_ids = {0, 34};
        s.planes = {{0.2, 0.5}, {0.5, 0.5}}; // voxel 0 sums to 0.7
        CHECK_THROWS_AS(view_aggregate(s, s, s, table, {1, 1, 0.5}), ProbNotNormalized);
    }

    SUBCASE("full DKT class space: 79 planes vs 51 sagittal planes") {
        const auto dkt = read_label_table(testsupport::dkt_table_path());
        VolumeHeader h;
        h.dims = {3, 3, 3};
        h.voxel_size_mm = {1.f, 1.f, 1.f};
        h.dtype = Dtype::F32;

        std::vector<std::uint16_t> full = {0};
        for (const auto& e : dkt.entries()) full.push_back(e.internal_id);
        std::vector<std::uint16_t> merged = {0};
        for (auto id : dkt.sagittal_class_ids()) merged.push_back(id);
        REQUIRE(full.size() == 79);
        REQUIRE(merged.size() == 51);

        std::mt19937_64 rng(41);
        std::uniform_real_distribution<double> unit(0.01, 1.0);
        auto random_stack = [&](const std::vector<std::uint16_t>& ids) {
            ProbStack s;
            s.header = h;
            s.class_ids = ids;
            s.planes.assign(ids.size(), std::vector<double>(h.voxel_count()));
            for (std::size_t v = 0; v < h.voxel_count(); ++v) {
                double total = 0;
                for (auto& plane : s.planes) {
                    plane[v] = unit(rng);
                    total += plane[v];
                }
                for (auto& plane : s.planes) plane[v] /= total;
            }
            return s;
        };

        const auto out = view_aggregate(random_stack(full), random_stack(full),
                                        random_stack(merged), dkt, {1, 1, 0.5});
        REQUIRE(out.probs.classes() == 79);
        for (std::size_t v = 0; v < h.voxel_count(); ++v) {
            double sum = 0;
            for (const auto& plane : out.probs.planes) sum += plane[v];
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }

        // lateral pairs received identical sagittal contributions
        const auto pair = dkt.lateral_pair_of(dkt.sagittal_id(59)); // superiorfrontal
        REQUIRE(pair.has_value());
        CHECK(pair->left == 59);
        CHECK(pair->right == 78);
    }
}

TEST_CASE("median frequency weights") {
    const auto uniform = median_frequency_weights({5, 5, 5, 5});
    for (double w : uniform.weights) CHECK(w == doctest::Approx(1.0));

    const auto w = median_frequency_weights({1, 2, 4});
    CHECK(w.weights[0] == doctest::Approx(2.0));
    CHECK(w.weights[1] == doctest::Approx(1.0));
    CHECK(w.weights[2] == doctest::Approx(0.5));

    const auto with_absent = median_frequency_weights({1, 0, 4});
    CHECK(with_absent.weights[1] == doctest::Approx(2.5)); // max of present weights
}

TEST_CASE("composite loss") {
    SUBCASE("perfect one-hot prediction is (near) zero") {
        std::vector<std::vector<double>> pred = {{1, 0, 0}, {0, 1, 0}, {1, 0, 0}};
        std::vector<int> target = {0, 1, 0};
        ClassWeights w{{1, 1, 1}};
        CHECK(composite_loss(pred, target, w) <= 1e-6);
    }

    SUBCASE("uniform prediction with balanced targets hits the closed form") {
        const int classes = 3, per_class = 4;
        std::vector<std::vector<double>> pred;
        std::vector<int> target;
        for (int c = 0; c < classes; ++c)
            for (int i = 0; i < per_class; ++i) {
                pred.push_back({1.0 / 3, 1.0 / 3, 1.0 / 3});
                target.push_back(c);
            }
        ClassWeights w{{2.0, 1.0, 0.5}};
        // CE = mean weight * ln 3; per-class soft dice = (2*4/3)/(4+4+eps)
        const double dice = (2.0 * per_class / classes) / (2.0 * per_class + 1e-7);
        const double expected = (2.0 + 1.0 + 0.5) / 3.0 * std::log(3.0) + (1.0 - dice);
        CHECK(composite_loss(pred, target, w) == doctest::Approx(expected).epsilon(1e-12));
    }

    SUBCASE("moving mass toward the target lowers the loss") {
        ClassWeights w{{1, 1}};
        const double worse = composite_loss({{0.6, 0.4}}, {0}, w);
        const double better = composite_loss({{0.7, 0.3}}, {0}, w);
        CHECK(better < worse);
    }

    SUBCASE("unnormalized rows are rejected") {
        CHECK_THROWS_AS(composite_loss({{0.4, 0.4}}, {0}, ClassWeights{{1, 1}}),
                        ProbNotNormalized);
    }
}

TEST_CASE("probability stacks exchange as per-class F32 volumes") {
    const auto dir = std::filesystem::temp_directory_path() / "cortexkit_netref_test";
    std::filesystem::create_directories(dir);
    const std::string base = (dir / "prob").string();

    VolumeHeader h;
    h.dims = {3, 2, 2};
    h.voxel_size_mm = {1.f, 1.f, 1.f};
    h.dtype = Dtype::F32;
    ProbStack s;
    s.header = h;
    s.class_ids = {0, 34};
    s.planes.assign(2, std::vector<double>(12, 0.0));
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t v = 0; v < 12; ++v) {
        const double p = unit(rng);
        s.planes[0][v] = p;
        s.planes[1][v] = 1.0 - p;
    }

    write_prob_stack(s, base);
    const auto back = read_prob_stack(base, s.class_ids);
    CHECK(back.header == h);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t v = 0; v < 12; ++v)
            CHECK(back.planes[c][v] == doctest::Approx(s.planes[c][v]).epsilon(1e-7));
}
