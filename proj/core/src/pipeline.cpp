// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "cortexkit/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <thread>

#include "cortexkit/evalstats.hpp"
#include "cortexkit/io.hpp"
#include "cortexkit/log.hpp"
#include "cortexkit/surfgen.hpp"
#include "cortexkit/surfmeasure.hpp"
#include "cortexkit/voxelgrid.hpp"

namespace cortexkit::pipeline {

namespace fs = std::filesystem;

Stage stage_from_string(const std::string& name) {
    for (Stage s : all_stages())
        if (to_string(s) == name) return s;
    throw IoFailure("unknown stage '" + name + "'");
}

std::string to_string(Stage stage) {
    switch (stage) {
    case Stage::Conform: return "conform";
    case Stage::Mask: return "mask";
    case Stage::Surf: return "surf";
    case Stage::Sphere: return "sphere";
    case Stage::Map: return "map";
    case Stage::Thickness: return "thickness";
    case Stage::Metrics: return "metrics";
    case Stage::Stats: return "stats";
    }
    return "?";
}

const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> stages = {Stage::Conform, Stage::Mask,      Stage::Surf,
                                              Stage::Sphere,  Stage::Map,       Stage::Thickness,
                                              Stage::Metrics, Stage::Stats};
    return stages;
}

namespace {

const char* hemi_tag(Hemi h) { return h == Hemi::Left ? "lh" : "rh"; }

struct Context {
    PipelineConfig config;
    fs::path root;
    LabelTable table;

    fs::path stage_dir(Stage s) const { return root / to_string(s); }
    fs::path input_labels() const {
        for (const char* name : {"input/labels.fslv", "input/labels.nii"}) {
            fs::path p = root / name;
            if (fs::exists(p)) return p;
        }
        return root / "input/labels.fslv";
    }
    fs::path conform_labels() const { return stage_dir(Stage::Conform) / "labels.fslv"; }
    fs::path white_off(Hemi h) const {
        return stage_dir(Stage::Surf) / (std::string(hemi_tag(h)) + ".white.off");
    }
    fs::path pial_off(Hemi h) const {
        return stage_dir(Stage::Surf) / (std::string(hemi_tag(h)) + ".pial.off");
    }
    fs::path sphere_off(Hemi h) const {
        return stage_dir(Stage::Sphere) / (std::string(hemi_tag(h)) + ".sphere.off");
    }
    fs::path map_labels(Hemi h) const {
        return stage_dir(Stage::Map) / (std::string(hemi_tag(h)) + ".labels.csv");
    }
    fs::path thickness_csv(Hemi h, const char* which) const {
        return stage_dir(Stage::Thickness) /
               (std::string(hemi_tag(h)) + "." + which + "_thickness.csv");
    }

    std::vector<Hemi> hemis() const {
        switch (config.hemi) {
        case HemiChoice::Left: return {Hemi::Left};
        case HemiChoice::Right: return {Hemi::Right};
        case HemiChoice::Both: return {Hemi::Left, Hemi::Right};
        }
        return {};
    }
};

void require_input(const fs::path& p) {
    if (!fs::exists(p)) throw IoFailure("missing input: " + p.string());
}

std::string roi_key(const LabelTable& table, std::uint16_t id) {
    std::string name;
    if (const auto* e = table.find(id)) name = e->name;
    std::erase(name, ','); // keep the stats CSV single-celled
    return std::to_string(id) + ":" + name;
}

// --- stage bodies -----------------------------------------------------------

void stage_conform(const Context& ctx) {
    require_input(ctx.input_labels());
    const auto labels = as_labels(io::read_volume(ctx.input_labels().string()));
    const auto conformed = voxelgrid::conform(labels, voxelgrid::conform_target(labels.header));
    fs::create_directories(ctx.stage_dir(Stage::Conform));
    io::write_volume(to_volume(conformed), ctx.conform_labels().string());
}

void stage_mask(const Context& ctx) {
    require_input(ctx.conform_labels());
    const auto labels = as_labels(io::read_volume(ctx.conform_labels().string()));
    const auto mask = voxelgrid::make_brainmask(labels, ctx.table, /*pad_cortex=*/true);
    fs::create_directories(ctx.stage_dir(Stage::Mask));
    io::write_volume(to_volume(mask), (ctx.stage_dir(Stage::Mask) / "brain.fslv").string());
}

/// Hemisphere of each cortical voxel; MergedPair clusters are resolved via
/// the WM centroids, matching the final-prediction lateralization.
std::vector<std::uint8_t> cortical_hemi_map(const LabelVolume& labels, const LabelTable& table) {
    bool any_merged = false;
    for (auto v : labels.values) {
        const auto* e = table.find(v);
        if (v && e && e->laterality == Laterality::MergedPair) {
            any_merged = true;
            break;
        }
    }
    LabelVolume lateralized;
    if (any_merged) lateralized = voxelgrid::lateralize(labels, table);

    std::vector<std::uint8_t> hemi(labels.values.size(), 0); // 0 none, 1 lh, 2 rh
    for (std::size_t i = 0; i < labels.values.size(); ++i) {
        const auto* e = table.find(labels.values[i]);
        if (!e || !e->is_cortical()) continue;
        switch (e->laterality) {
        case Laterality::Left: hemi[i] = 1; break;
        case Laterality::Right: hemi[i] = 2; break;
        case Laterality::MergedPair:
            hemi[i] = lateralized.values[i] < 2000 ? 1 : 2;
            break;
        case Laterality::Midline: break;
        }
    }
    return hemi;
}

void stage_surf(const Context& ctx, Hemi hemi) {
    require_input(ctx.conform_labels());
    const auto labels = as_labels(io::read_volume(ctx.conform_labels().string()));

    const auto* wm = ctx.table.white_matter(hemi == Hemi::Left ? Laterality::Left
                                                               : Laterality::Right);
    if (!wm) throw IoFailure("label table lacks the cerebral WM entry for " +
                             std::string(hemi_tag(hemi)));

    BinaryMask white(labels.header);
    white.header.dtype = Dtype::U8;
    for (std::size_t i = 0; i < labels.values.size(); ++i)
        white.values[i] = labels.values[i] == wm->internal_id;

    const auto hemi_map = cortical_hemi_map(labels, ctx.table);
    const std::uint8_t want = hemi == Hemi::Left ? 1 : 2;
    BinaryMask pial = white;
    for (std::size_t i = 0; i < labels.values.size(); ++i)
        if (hemi_map[i] == want) pial.values[i] = 1;

    fs::create_directories(ctx.stage_dir(Stage::Surf));
    io::write_mesh(surfgen::marching_cubes(white), ctx.white_off(hemi).string());
    io::write_mesh(surfgen::marching_cubes(pial), ctx.pial_off(hemi).string());
}

void stage_sphere(const Context& ctx, Hemi hemi) {
    require_input(ctx.white_off(hemi));
    const auto white = io::read_mesh(ctx.white_off(hemi).string());

    const auto lap = surfgen::cotan_laplacian(white);
    auto emb = surfgen::smallest_eigenpairs(lap.stiffness, lap.lumped_mass, 3);
    emb = surfgen::orient_eigenfunctions(emb, white.vertices);
    const auto sphere = surfgen::spectral_sphere_map(white, emb);

    fs::create_directories(ctx.stage_dir(Stage::Sphere));
    io::write_mesh(sphere, ctx.sphere_off(hemi).string());

    // embedding dump: lambdas in a header comment, then per-vertex rows
    std::string path =
        (ctx.stage_dir(Stage::Sphere) / (std::string(hemi_tag(hemi)) + ".embedding.csv")).string();
    std::string text = "# lambda1=" + io::format_double(emb.eigenvalues[0]) +
                       ",lambda2=" + io::format_double(emb.eigenvalues[1]) +
                       ",lambda3=" + io::format_double(emb.eigenvalues[2]) + "\n";
    text += "vertex_id,f1,f2,f3\n";
    for (int v = 0; v < white.vertex_count(); ++v)
        text += std::to_string(v) + "," + io::format_double(emb.functions(v, 0)) + "," +
                io::format_double(emb.functions(v, 1)) + "," +
                io::format_double(emb.functions(v, 2)) + "\n";
    std::ofstream out(path, std::ios::binary);
    if (!out.write(text.data(), std::streamsize(text.size())))
        throw IoFailure("short write on " + path);
}

void stage_map(const Context& ctx, Hemi hemi) {
    require_input(ctx.conform_labels());
    require_input(ctx.pial_off(hemi));
    const auto labels = as_labels(io::read_volume(ctx.conform_labels().string()));
    const auto pial = io::read_mesh(ctx.pial_off(hemi).string());
    const auto labeling = surfmeasure::sample_labels_to_surface(labels, pial, ctx.table);

    fs::create_directories(ctx.stage_dir(Stage::Map));
    std::vector<double> as_values(labeling.begin(), labeling.end());
    io::write_vertex_map_csv(as_values, ctx.map_labels(hemi).string());
}

void stage_thickness(const Context& ctx, Hemi hemi) {
    require_input(ctx.white_off(hemi));
    require_input(ctx.pial_off(hemi));
    const auto white = io::read_mesh(ctx.white_off(hemi).string());
    const auto pial = io::read_mesh(ctx.pial_off(hemi).string());

    fs::create_directories(ctx.stage_dir(Stage::Thickness));
    io::write_vertex_map_csv(surfmeasure::thickness(white, pial),
                             ctx.thickness_csv(hemi, "white").string());
    io::write_vertex_map_csv(surfmeasure::thickness(pial, white),
                             ctx.thickness_csv(hemi, "pial").string());
}

void stage_metrics_hemi(const Context& ctx, Hemi hemi) {
    require_input(ctx.white_off(hemi));
    require_input(ctx.pial_off(hemi));
    require_input(ctx.sphere_off(hemi));

    std::vector<io::StatsRow> rows;
    auto report_mesh = [&rows](const std::string& name, const TriangleMesh& mesh) {
        const auto topo = surfgen::euler_defects(mesh);
        rows.push_back({name, "vertices", double(mesh.vertex_count())});
        rows.push_back({name, "faces", double(mesh.face_count())});
        rows.push_back({name, "euler", double(topo.euler)});
        rows.push_back({name, "components", double(topo.components)});
        rows.push_back({name, "defects", double(topo.defect_count)});
        rows.push_back({name, "mean_quality", surfgen::mesh_quality(mesh).mean});
        rows.push_back({name, "self_intersections", double(surfgen::self_intersections(mesh).count)});
    };

    const auto white = io::read_mesh(ctx.white_off(hemi).string());
    const auto pial = io::read_mesh(ctx.pial_off(hemi).string());
    const auto sphere = io::read_mesh(ctx.sphere_off(hemi).string());
    report_mesh("white", white);
    report_mesh("pial", pial);
    rows.push_back({"sphere", "metric_distortion", surfgen::metric_distortion(white, sphere)});

    fs::create_directories(ctx.stage_dir(Stage::Metrics));
    io::write_stats_csv(rows, (ctx.stage_dir(Stage::Metrics) /
                               (std::string(hemi_tag(hemi)) + ".mesh.csv"))
                                  .string());
}

void stage_metrics_volume(const Context& ctx) {
    const fs::path ref_path = ctx.root / "input/reference.fslv";
    if (!fs::exists(ref_path)) return; // reference volume is optional
    require_input(ctx.conform_labels());

    const auto reference = as_labels(io::read_volume(ref_path.string()));
    const auto conformed_ref =
        voxelgrid::conform(reference, voxelgrid::conform_target(reference.header));
    const auto predicted = as_labels(io::read_volume(ctx.conform_labels().string()));
    const auto report = evalstats::dice_per_label(conformed_ref, predicted, ctx.table);

    std::vector<evalstats::DiceRow> rows;
    for (const auto& [id, metrics] : report.per_label) {
        if (!metrics.dice && !metrics.avg_hd) continue;
        rows.push_back({roi_key(ctx.table, id), metrics.dice, metrics.avg_hd});
    }
    fs::create_directories(ctx.stage_dir(Stage::Metrics));
    evalstats::write_dice_csv(rows,
                              (ctx.stage_dir(Stage::Metrics) / "volume_metrics.csv").string());
}

void stage_stats_hemi(const Context& ctx, Hemi hemi) {
    require_input(ctx.pial_off(hemi));
    require_input(ctx.map_labels(hemi));
    require_input(ctx.thickness_csv(hemi, "pial"));

    const auto pial = io::read_mesh(ctx.pial_off(hemi).string());
    const auto label_values = io::read_vertex_map_csv(ctx.map_labels(hemi).string());
    surfmeasure::SurfaceLabeling labeling(label_values.size());
    for (std::size_t i = 0; i < label_values.size(); ++i)
        labeling[i] = std::uint16_t(label_values[i]);
    const auto thick = io::read_vertex_map_csv(ctx.thickness_csv(hemi, "pial").string());
    const auto curvature = surfmeasure::mean_curvature(pial);

    const auto stats = surfmeasure::roi_stats(labeling, thick, curvature, pial);
    std::vector<io::StatsRow> rows;
    for (const auto& [roi, s] : stats) {
        const std::string key = roi_key(ctx.table, roi);
        rows.push_back({key, "mean_thickness", s.mean_thickness});
        rows.push_back({key, "mean_abs_curvature", s.mean_abs_curvature});
        rows.push_back({key, "area_mm2", s.area_mm2});
    }
    fs::create_directories(ctx.stage_dir(Stage::Stats));
    io::write_stats_csv(rows, (ctx.stage_dir(Stage::Stats) /
                               (std::string(hemi_tag(hemi)) + ".roi_stats.csv"))
                                  .string());
}

void stage_stats_volumes(const Context& ctx) {
    require_input(ctx.conform_labels());
    const auto labels = as_labels(io::read_volume(ctx.conform_labels().string()));
    const double voxel_mm3 = double(labels.header.voxel_size_mm[0]) *
                             labels.header.voxel_size_mm[1] * labels.header.voxel_size_mm[2];
    std::map<std::uint16_t, std::size_t> counts;
    for (auto v : labels.values)
        if (v) ++counts[v];

    std::vector<io::StatsRow> rows;
    for (const auto& [id, count] : counts)
        rows.push_back({roi_key(ctx.table, id), "volume_mm3", double(count) * voxel_mm3});
    fs::create_directories(ctx.stage_dir(Stage::Stats));
    io::write_stats_csv(rows, (ctx.stage_dir(Stage::Stats) / "volumes.csv").string());
}

// --- orchestration ----------------------------------------------------------

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void run_hemis(const Context& ctx, Stage stage, const std::function<void(Hemi)>& body,
               std::vector<StageTiming>& timings) {
    const auto hemis = ctx.hemis();
    std::vector<double> elapsed(hemis.size(), 0.0);
    std::vector<std::exception_ptr> failures(hemis.size());

    auto task = [&](std::size_t slot) {
        const auto start = Clock::now();
        try {
            body(hemis[slot]);
        } catch (...) {
            failures[slot] = std::current_exception();
        }
        elapsed[slot] = seconds_since(start);
    };

    if (hemis.size() == 2 && ctx.config.threads >= 2) {
        std::thread left(task, std::size_t(0));
        task(1);
        left.join();
    } else {
        for (std::size_t i = 0; i < hemis.size(); ++i) task(i);
    }

    for (std::size_t i = 0; i < hemis.size(); ++i)
        timings.push_back({to_string(stage), hemi_tag(hemis[i]), elapsed[i]});
    for (auto& failure : failures)
        if (failure) std::rethrow_exception(failure);
}

void write_timings(const fs::path& root, const std::vector<StageTiming>& timings) {
    io::CsvTable table;
    table.header = {"stage", "hemi", "seconds"};
    for (const auto& t : timings)
        table.rows.push_back({t.stage, t.hemi, io::format_double(t.seconds)});
    std::error_code ec;
    fs::create_directories(root, ec);
    try {
        io::write_csv(table, (root / "timings.csv").string());
    } catch (const std::exception& e) {
        log::error("failed to write timing report: ", e.what());
    }
}

} // namespace

RunReport run(const PipelineConfig& config) {
    RunReport report;
    Context ctx{config, fs::path(config.subject_dir), {}};

    try {
        if (config.subject_dir.empty()) throw IoFailure("subject directory not set");
        if (config.stages.empty()) throw IoFailure("no stages requested");
        int last = -1;
        for (Stage s : config.stages) {
            const auto& order = all_stages();
            const int idx = int(std::find(order.begin(), order.end(), s) - order.begin());
            if (idx <= last)
                throw IoFailure("stages must be requested in dependency order (conform -> mask -> "
                                "surf -> sphere -> map -> thickness -> metrics -> stats)");
            last = idx;
        }

        const std::string table_path = config.label_table.empty()
                                           ? (ctx.root / "input/labels.tsv").string()
                                           : config.label_table;
        require_input(table_path);
        ctx.table = read_label_table(table_path);

        for (Stage stage : config.stages) {
            switch (stage) {
            case Stage::Conform:
            case Stage::Mask: {
                const auto start = Clock::now();
                if (stage == Stage::Conform)
                    stage_conform(ctx);
                else
                    stage_mask(ctx);
                report.timings.push_back({to_string(stage), "all", seconds_since(start)});
                break;
            }
            case Stage::Surf:
                run_hemis(ctx, stage, [&](Hemi h) { stage_surf(ctx, h); }, report.timings);
                break;
            case Stage::Sphere:
                run_hemis(ctx, stage, [&](Hemi h) { stage_sphere(ctx, h); }, report.timings);
                break;
            case Stage::Map:
                run_hemis(ctx, stage, [&](Hemi h) { stage_map(ctx, h); }, report.timings);
                break;
            case Stage::Thickness:
                run_hemis(ctx, stage, [&](Hemi h) { stage_thickness(ctx, h); }, report.timings);
                break;
            case Stage::Metrics: {
                run_hemis(ctx, stage, [&](Hemi h) { stage_metrics_hemi(ctx, h); }, report.timings);
                const auto start = Clock::now();
                stage_metrics_volume(ctx);
                report.timings.push_back({"metrics", "all", seconds_since(start)});
                break;
            }
            case Stage::Stats: {
                run_hemis(ctx, stage, [&](Hemi h) { stage_stats_hemi(ctx, h); }, report.timings);
                const auto start = Clock::now();
                stage_stats_volumes(ctx);
                report.timings.push_back({"stats", "all", seconds_since(start)});
                break;
            }
            }
        }
    } catch (const Error& e) {
        report.exit_code = e.kind() == ErrorKind::Input ? 1 : 2;
        report.error = e.what();
        log::error(e.what());
    } catch (const std::exception& e) {
        report.exit_code = 2;
        report.error = e.what();
        log::error(e.what());
    }

    write_timings(ctx.root, report.timings);
    return report;
}

// ---------------------------------------------------------------------------
// Phantom
// ---------------------------------------------------------------------------

namespace {

struct Blob {
    Eigen::Vector3d center;
    std::uint16_t wm_label;
    std::uint16_t cortex_upper, cortex_lower; // lateralized parcels by z
    std::uint16_t merged_cap;                 // MergedPair parcel on the +y cap
};

} // namespace

PhantomManifest phantom(const std::string& out_dir, std::uint64_t seed,
                        const std::string& label_table_path) {
    const LabelTable table = read_label_table(label_table_path);
    for (std::uint16_t id : {1, 19, 59, 78, 53, 74, 64, 12})
        if (!table.contains(id))
            throw IoFailure("phantom requires label id " + std::to_string(id) +
                            " in the label table");

    constexpr int kDim = 64;
    constexpr double kWmRadius = 8.0;
    constexpr double kGmRadius = 11.0; // thickness = 3 mm by construction

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.75, 0.75);
    auto jittered = [&](double x, double y, double z) {
        return Eigen::Vector3d(x + jitter(rng), y + jitter(rng), z + jitter(rng));
    };

    const Blob blobs[2] = {
        {jittered(16, 32, 32), 1, 59, 53, 64},  // lh: superiorfrontal / postcentral / insula
        {jittered(48, 32, 32), 19, 78, 74, 64}, // rh counterparts
    };
    const Eigen::Vector3d brainstem = jittered(32, 32, 26);
    constexpr double kBrainstemRadius = 2.5;

    VolumeHeader header;
    header.dims = {kDim, kDim, kDim};
    header.voxel_size_mm = {1.f, 1.f, 1.f};
    header.dtype = Dtype::U16;
    LabelVolume labels(header, 0);

    for (int z = 0; z < kDim; ++z)
        for (int y = 0; y < kDim; ++y)
            for (int x = 0; x < kDim; ++x) {
                const Eigen::Vector3d p(x + 0.5, y + 0.5, z + 0.5);
                std::uint16_t value = 0;
                for (const auto& blob : blobs) {
                    const double d = (p - blob.center).norm();
                    if (d <= kWmRadius) {
                        value = blob.wm_label;
                    } else if (d <= kGmRadius) {
                        if (p.y() - blob.center.y() > 7.0)
                            value = blob.merged_cap;
                        else
                            value = p.z() >= blob.center.z() ? blob.cortex_upper
                                                             : blob.cortex_lower;
                    }
                    if (value) break;
                }
                if (!value && (p - brainstem).norm() <= kBrainstemRadius) value = 12;
                labels.at(x, y, z) = value;
            }

    PhantomManifest manifest;
    manifest.thickness_mm = kGmRadius - kWmRadius;
    for (auto v : labels.values)
        if (v) manifest.label_volumes_mm3[v] += 1.0;

    const fs::path input = fs::path(out_dir) / "input";
    fs::create_directories(input);
    io::write_volume(to_volume(labels), (input / "labels.fslv").string());
    io::write_volume(to_volume(labels), (input / "reference.fslv").string());
    write_label_table(table, (input / "labels.tsv").string());

    io::CsvTable mtable;
    mtable.header = {"key", "value"};
    mtable.rows.push_back({"seed", std::to_string(seed)});
    mtable.rows.push_back({"thickness_mm", io::format_double(manifest.thickness_mm)});
    for (const auto& [id, volume] : manifest.label_volumes_mm3)
        mtable.rows.push_back({"volume_" + std::to_string(id), io::format_double(volume)});
    io::write_csv(mtable, (input / "manifest.csv").string());
    return manifest;
}

PhantomManifest read_manifest(const std::string& path) {
    PhantomManifest manifest;
    for (const auto& row : io::read_csv(path).rows) {
        if (row.size() < 2) continue;
        if (row[0] == "thickness_mm") manifest.thickness_mm = std::stod(row[1]);
        if (row[0].rfind("volume_", 0) == 0)
            manifest.label_volumes_mm3[std::uint16_t(std::stoul(row[0].substr(7)))] =
                std::stod(row[1]);
    }
    return manifest;
}

} // namespace cortexkit::pipeline
