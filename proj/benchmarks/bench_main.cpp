// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "cortexkit/evalstats.hpp"
#include "cortexkit/surfgen.hpp"
#include "cortexkit/surfmeasure.hpp"
#include "cortexkit/voxelgrid.hpp"

namespace {

using namespace cortexkit;

BinaryMask random_mask(int n, double p, std::uint64_t seed) {
    VolumeHeader h;
    h.dims = {std::uint32_t(n), std::uint32_t(n), std::uint32_t(n)};
    h.voxel_size_mm = {1.f, 1.f, 1.f};
    h.dtype = Dtype::U8;
    BinaryMask mask(h, 0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& v : mask.values) v = unit(rng) < p ? 1 : 0;
    return mask;
}

BinaryMask ball(int n, double radius) {
    VolumeHeader h;
    h.dims = {std::uint32_t(n), std::uint32_t(n), std::uint32_t(n)};
    h.voxel_size_mm = {1.f, 1.f, 1.f};
    h.dtype = Dtype::U8;
    BinaryMask mask(h, 0);
    const double c = n / 2.0;
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                const double dx = x + 0.5 - c, dy = y + 0.5 - c, dz = z + 0.5 - c;
                if (dx * dx + dy * dy + dz * dz <= radius * radius) mask.at(x, y, z) = 1;
            }
    return mask;
}

void BM_avg_hausdorff(benchmark::State& state) {
    const int n = int(state.range(0));
    const auto g = random_mask(n, 0.2, 1);
    const auto p = random_mask(n, 0.2, 2);
    for (auto _ : state)
        benchmark::DoNotOptimize(evalstats::avg_hausdorff({g, p}));
}
BENCHMARK(BM_avg_hausdorff)->Arg(16)->Arg(32)->Arg(64);

void BM_marching_cubes(benchmark::State& state) {
    const auto mask = ball(int(state.range(0)), state.range(0) / 2.0 - 2.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(surfgen::marching_cubes(mask));
}
BENCHMARK(BM_marching_cubes)->Arg(32)->Arg(64);

void BM_eigensolve(benchmark::State& state) {
    const auto mesh = surfgen::marching_cubes(ball(int(state.range(0)), state.range(0) / 2.0 - 2.0));
    const auto lap = surfgen::cotan_laplacian(mesh);
    for (auto _ : state)
        benchmark::DoNotOptimize(surfgen::smallest_eigenpairs(lap.stiffness, lap.lumped_mass, 3));
}
BENCHMARK(BM_eigensolve)->Arg(24)->Arg(48);

void BM_thickness(benchmark::State& state) {
    const int n = int(state.range(0));
    const auto white = surfgen::marching_cubes(ball(n, n / 2.0 - 5.0));
    const auto pial = surfgen::marching_cubes(ball(n, n / 2.0 - 2.0));
    for (auto _ : state)
        benchmark::DoNotOptimize(surfmeasure::thickness(white, pial));
}
BENCHMARK(BM_thickness)->Arg(32)->Arg(48);

void BM_brainmask_closure(benchmark::State& state) {
    const auto mask = ball(int(state.range(0)), state.range(0) / 2.0 - 2.0);
    const voxelgrid::StructuringElement se{2, voxelgrid::Connectivity::Vertex26};
    for (auto _ : state)
        benchmark::DoNotOptimize(voxelgrid::closure(mask, se));
}
BENCHMARK(BM_brainmask_closure)->Arg(32)->Arg(64);

} // namespace

BENCHMARK_MAIN();
