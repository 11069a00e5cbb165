// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "cortexkit/io.hpp"
#include "cortexkit/pipeline.hpp"
#include "cortexkit/surfgen.hpp"
#include "support/test_meshes.hpp"

using namespace cortexkit;
using namespace cortexkit::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "cortexkit_pipeline_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

PipelineConfig base_config(const fs::path& subject) {
    PipelineConfig config;
    config.subject_dir = subject.string();
    config.stages = all_stages();
    config.threads = 1;
    config.hemi = HemiChoice::Both;
    return config;
}

/// Every file under the stage directories, relative path -> bytes.
std::map<std::string, std::string> stage_outputs(const fs::path& subject) {
    std::map<std::string, std::string> files;
    for (Stage s : all_stages()) {
        const fs::path dir = subject / to_string(s);
        if (!fs::exists(dir)) continue;
        for (const auto& entry : fs::recursive_directory_iterator(dir))
            if (entry.is_regular_file())
                files[fs::relative(entry.path(), subject).string()] = slurp(entry.path());
    }
    return files;
}

} // namespace

TEST_CASE("phantom is deterministic per seed and matches its manifest") {
    const auto a = fresh_dir("phantom_a");
    const auto b = fresh_dir("phantom_b");
    const auto c = fresh_dir("phantom_c");

    const auto ma = phantom(a.string(), 42, testsupport::dkt_table_path());
    const auto mb = phantom(b.string(), 42, testsupport::dkt_table_path());
    const auto mc = phantom(c.string(), 43, testsupport::dkt_table_path());

    CHECK(slurp(a / "input/labels.fslv") == slurp(b / "input/labels.fslv"));
    CHECK(slurp(a / "input/labels.fslv") != slurp(c / "input/labels.fslv"));
    CHECK(ma.thickness_mm == 3.0);

    // manifest re-read equals the generated truth
    const auto manifest = read_manifest((a / "input/manifest.csv").string());
    CHECK(manifest.thickness_mm == 3.0);
    CHECK(manifest.label_volumes_mm3 == ma.label_volumes_mm3);
    CHECK(ma.label_volumes_mm3.size() == 8); // 2 WM, 5 cortical parcels, brain stem
}

TEST_CASE("phantom WM blob is a topological sphere") {
    const auto dir = fresh_dir("phantom_wm");
    phantom(dir.string(), 7, testsupport::dkt_table_path());
    const auto labels = as_labels(io::read_volume((dir / "input/labels.fslv").string()));
    BinaryMask wm(labels.header);
    wm.header.dtype = Dtype::U8;
    for (std::size_t i = 0; i < labels.values.size(); ++i) wm.values[i] = labels.values[i] == 1;
    const auto topo = surfgen::euler_defects(surfgen::marching_cubes(wm));
    CHECK(topo.euler == 2);
    CHECK(topo.genus == 0);
}

TEST_CASE("stage ordering and dependencies are enforced") {
    const auto dir = fresh_dir("deps");
    phantom(dir.string(), 1, testsupport::dkt_table_path());

    SUBCASE("sphere without surf outputs fails with exit 1") {
        auto config = base_config(dir);
        config.stages = {Stage::Sphere};
        const auto report = run(config);
        CHECK(report.exit_code == 1);
        CHECK(report.error.find("missing input") != std::string::npos);
        CHECK(fs::exists(dir / "timings.csv")); // timing report survives failures
    }

    SUBCASE("out-of-order stages are rejected") {
        auto config = base_config(dir);
        config.stages = {Stage::Mask, Stage::Conform};
        CHECK(run(config).exit_code == 1);
    }

    SUBCASE("missing subject inputs fail with the offending path") {
        const auto empty = fresh_dir("deps_empty");
        auto config = base_config(empty);
        const auto report = run(config);
        CHECK(report.exit_code == 1);
        CHECK(report.error.find("labels.tsv") != std::string::npos);
    }
}

TEST_CASE("NIfTI subject inputs are accepted") {
    const auto dir = fresh_dir("nifti_input");
    phantom(dir.string(), 2, testsupport::dkt_table_path());
    const auto volume = io::read_volume((dir / "input/labels.fslv").string());
    io::write_volume(volume, (dir / "input/labels.nii").string());
    fs::remove(dir / "input/labels.fslv");

    auto config = base_config(dir);
    config.stages = {Stage::Conform};
    REQUIRE(run(config).exit_code == 0);
    const auto conformed = as_labels(io::read_volume((dir / "conform/labels.fslv").string()));
    CHECK(conformed == as_labels(volume)); // already 1 mm isotropic: identity
}

TEST_CASE("full pipeline run is reproducible and hemisphere-parallel safe") {
    const auto a = fresh_dir("run_a");
    const auto b = fresh_dir("run_b");
    const auto par = fresh_dir("run_par");
    for (const auto& dir : {a, b, par}) phantom(dir.string(), 7, testsupport::dkt_table_path());

    auto config_a = base_config(a);
    REQUIRE(run(config_a).exit_code == 0);

    // bitwise reproducibility of a sequential re-run
    auto config_b = base_config(b);
    REQUIRE(run(config_b).exit_code == 0);
    const auto files_a = stage_outputs(a);
    const auto files_b = stage_outputs(b);
    REQUIRE(!files_a.empty());
    CHECK(files_a == files_b);

    // the timing report exists alongside, with the expected schema
    const auto timing = io::read_csv((a / "timings.csv").string());
    CHECK(timing.header == std::vector<std::string>{"stage", "hemi", "seconds"});
    CHECK(timing.rows.size() >= all_stages().size());

    // hemisphere-parallel run produces identical bytes
    auto config_par = base_config(par);
    config_par.threads = 2;
    REQUIRE(run(config_par).exit_code == 0);
    CHECK(stage_outputs(par) == files_a);
}

TEST_CASE("single-hemisphere runs reproduce the files of a both run") {
    const auto both = fresh_dir("hemi_both");
    const auto split = fresh_dir("hemi_split");
    for (const auto& dir : {both, split}) phantom(dir.string(), 3, testsupport::dkt_table_path());

    REQUIRE(run(base_config(both)).exit_code == 0);

    auto left = base_config(split);
    left.hemi = HemiChoice::Left;
    REQUIRE(run(left).exit_code == 0);
    auto right = base_config(split);
    right.hemi = HemiChoice::Right;
    REQUIRE(run(right).exit_code == 0);

    CHECK(stage_outputs(split) == stage_outputs(both));
}

TEST_CASE("stats volumes agree with the phantom manifest") {
    const auto dir = fresh_dir("volumes");
    const auto manifest = phantom(dir.string(), 11, testsupport::dkt_table_path());
    auto config = base_config(dir);
    REQUIRE(run(config).exit_code == 0);

    // recovered shell thickness tracks the manifest's ground truth
    for (const char* hemi : {"lh", "rh"}) {
        const auto thick = io::read_vertex_map_csv(
            (dir / "thickness" / (std::string(hemi) + ".white_thickness.csv")).string());
        double mean = 0;
        for (double t : thick) mean += t;
        mean /= double(thick.size());
        CHECK(std::abs(mean - manifest.thickness_mm) < 0.5);
    }

    const auto rows = io::read_stats_csv((dir / "stats/volumes.csv").string());
    std::map<std::uint16_t, double> measured;
    for (const auto& row : rows) {
        if (row.measure != "volume_mm3") continue;
        measured[std::uint16_t(std::stoul(row.roi.substr(0, row.roi.find(':'))))] = row.value;
    }
    CHECK(measured == manifest.label_volumes_mm3);

    // the volume metrics table compares the conformed input against itself
    const auto dice_rows = io::read_csv((dir / "metrics/volume_metrics.csv").string());
    CHECK(dice_rows.header == std::vector<std::string>{"label", "dice", "avg_hd"});
    for (const auto& row : dice_rows.rows) CHECK(std::stod(row[1]) == doctest::Approx(1.0));
}

TEST_CASE("pipeline surfaces pass the mesh QA gates") {
    const auto dir = fresh_dir("qa");
    phantom(dir.string(), 5, testsupport::dkt_table_path());
    REQUIRE(run(base_config(dir)).exit_code == 0);

    for (const char* hemi : {"lh", "rh"}) {
        const auto rows =
            io::read_stats_csv((dir / "metrics" / (std::string(hemi) + ".mesh.csv")).string());
        std::map<std::string, double> white, pial, sphere;
        for (const auto& row : rows) {
            if (row.roi == "white") white[row.measure] = row.value;
            if (row.roi == "pial") pial[row.measure] = row.value;
            if (row.roi == "sphere") sphere[row.measure] = row.value;
        }
        CHECK(white.at("euler") == 2);
        CHECK(white.at("defects") == 0);
        CHECK(white.at("self_intersections") == 0);
        CHECK(pial.at("euler") == 2);
        CHECK(white.at("mean_quality") > 0.5);
        CHECK(sphere.at("metric_distortion") >= 0);

        const auto sphere_mesh =
            io::read_mesh((dir / "sphere" / (std::string(hemi) + ".sphere.off")).string());
        for (const auto& v : sphere_mesh.vertices) CHECK(std::abs(v.norm() - 1.0) < 1e-9);
        CHECK(signed_volume(sphere_mesh) > 0);
    }
}

TEST_CASE("phantom pial surfaces are fully labeled with their hemisphere's parcels") {
    const auto dir = fresh_dir("labeling");
    phantom(dir.string(), 7, testsupport::dkt_table_path());
    REQUIRE(run(base_config(dir)).exit_code == 0);

    const std::map<std::string, std::set<std::uint16_t>> expected = {
        {"lh", {53, 59, 64}}, // postcentral, superiorfrontal, insula
        {"rh", {74, 78, 64}},
    };
    for (const auto& [hemi, parcels] : expected) {
        const auto values =
            io::read_vertex_map_csv((dir / "map" / (hemi + ".labels.csv")).string());
        std::set<std::uint16_t> seen;
        std::size_t unlabeled = 0;
        for (double v : values) {
            const auto id = std::uint16_t(v);
            if (id == 0)
                ++unlabeled;
            else
                seen.insert(id);
        }
        CHECK(unlabeled == 0);
        CHECK(seen == parcels);

        // ROI areas partition the labeled pial surface
        const auto pial = io::read_mesh((dir / "surf" / (hemi + ".pial.off")).string());
        const auto rows =
            io::read_stats_csv((dir / "stats" / (hemi + ".roi_stats.csv")).string());
        double roi_area = 0;
        for (const auto& row : rows)
            if (row.measure == "area_mm2") roi_area += row.value;
        CHECK(roi_area == doctest::Approx(total_area(pial)).epsilon(1e-6));
    }
}

TEST_CASE("cli binary honors config files, flags, and exit codes") {
    const char* cli = std::getenv("CORTEXKIT_CLI");
    REQUIRE_MESSAGE(cli != nullptr, "CORTEXKIT_CLI must point at the cortexkit binary");

    const auto dir = fresh_dir("cli");
    const auto table = testsupport::dkt_table_path();
    auto shell = [&](const std::string& args) {
        return std::system((std::string(cli) + " " + args + " >/dev/null 2>&1").c_str()) / 256;
    };

    CHECK(shell("phantom --subject-dir " + dir.string() + " --label-table " + table +
                " --seed 9") == 0);

    // config file drives the run; flags win over config values
    const auto config_path = dir / "run.cfg";
    std::ofstream(config_path) << "subject-dir = " << dir.string() << "\n"
                               << "threads = 1\n"
                               << "hemi = both\n";
    CHECK(shell("conform --config " + config_path.string()) == 0);
    CHECK(shell("mask --config " + config_path.string()) == 0);
    CHECK(fs::exists(dir / "mask/brain.fslv"));

    // flags beat config values: the config points at a nonexistent subject
    const auto bad_config = dir / "bad.cfg";
    std::ofstream(bad_config) << "subject-dir = /nonexistent/subject\n";
    CHECK(shell("surf --config " + bad_config.string() + " --subject-dir " + dir.string()) == 0);
    CHECK(fs::exists(dir / "surf/lh.white.off"));

    // dependency failure surfaces as exit 1
    const auto empty = fresh_dir("cli_empty");
    CHECK(shell("sphere --subject-dir " + empty.string() + " --label-table " + table) == 1);

    // full run through the binary
    CHECK(shell("all --subject-dir " + dir.string()) == 0);
    CHECK(fs::exists(dir / "stats/volumes.csv"));

    // CORTEXKIT_LOG=info surfaces per-stage timing lines on stderr
    const auto log_path = dir / "stderr.log";
    CHECK(std::system(("CORTEXKIT_LOG=info " + std::string(cli) + " conform --subject-dir " +
                       dir.string() + " --label-table " + table + " 2> " + log_path.string() +
                       " >/dev/null")
                          .c_str()) == 0);
    const auto log_text = slurp(log_path);
    CHECK(log_text.find("[cortexkit:info] conform") != std::string::npos);
}
