// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
// cortexkit: batch surface pipeline over a subject directory.
//
//   cortexkit phantom --subject-dir S --label-table dkt_labels.tsv --seed 7
//   cortexkit all     --subject-dir S
//   cortexkit conform|mask|surf|sphere|map|thickness|metrics|stats ...
//
// Exit codes: 0 success, 1 input error, 2 numerical failure.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cortexkit/errors.hpp"
#include "cortexkit/log.hpp"
#include "cortexkit/pipeline.hpp"

namespace {

struct GlobalOptions {
    std::string subject_dir;
    std::string label_table;
    int threads = 1;
    std::string hemi = "both";
    std::uint64_t seed = 0;
    std::string view_weights = "1,1,0.5";
};

cortexkit::pipeline::HemiChoice parse_hemi(const std::string& s) {
    using cortexkit::pipeline::HemiChoice;
    if (s == "left") return HemiChoice::Left;
    if (s == "right") return HemiChoice::Right;
    if (s == "both") return HemiChoice::Both;
    throw CLI::ValidationError("--hemi must be left, right, or both");
}

cortexkit::netref::ViewWeights parse_view_weights(const std::string& s) {
    cortexkit::netref::ViewWeights w;
    if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &w.coronal, &w.axial, &w.sagittal) != 3)
        throw CLI::ValidationError("--view-weights expects three comma-separated numbers");
    return w;
}

int run_stages(const GlobalOptions& opts, const std::vector<cortexkit::pipeline::Stage>& stages) {
    cortexkit::pipeline::PipelineConfig config;
    config.subject_dir = opts.subject_dir;
    config.label_table = opts.label_table;
    config.stages = stages;
    config.threads = opts.threads;
    config.hemi = parse_hemi(opts.hemi);
    config.seed = opts.seed;
    config.view_weights = parse_view_weights(opts.view_weights);

    const auto report = cortexkit::pipeline::run(config);
    for (const auto& t : report.timings)
        cortexkit::log::info(t.stage, "[", t.hemi, "] ", t.seconds, " s");
    if (report.exit_code != 0) std::fprintf(stderr, "cortexkit: %s\n", report.error.c_str());
    return report.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cortexkit - volume conforming, surface generation, spectral spherical "
                 "embedding, and morphometric statistics"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand
    app.set_version_flag("--version", "cortexkit 0.1.0");

    GlobalOptions opts;
    app.set_config("--config", "", "flat key = value configuration file; flags win");
    app.add_option("--subject-dir", opts.subject_dir, "subject working directory");
    app.add_option("--label-table", opts.label_table,
                   "label table TSV (default: <subject-dir>/input/labels.tsv)");
    app.add_option("--threads", opts.threads, "worker threads (hemispheres run in parallel)")
        ->check(CLI::PositiveNumber);
    app.add_option("--hemi", opts.hemi, "left, right, or both")
        ->check(CLI::IsMember({"left", "right", "both"}));
    app.add_option("--seed", opts.seed, "seed for synthetic data generation");
    app.add_option("--view-weights", opts.view_weights,
                   "coronal,axial,sagittal aggregation weights");

    using cortexkit::pipeline::Stage;
    std::vector<std::pair<Stage, CLI::App*>> stage_commands;
    for (Stage stage : cortexkit::pipeline::all_stages()) {
        auto* cmd = app.add_subcommand(cortexkit::pipeline::to_string(stage),
                                       "run the " + cortexkit::pipeline::to_string(stage) +
                                           " stage");
        stage_commands.emplace_back(stage, cmd);
    }
    auto* all_cmd = app.add_subcommand("all", "run every stage in order");
    auto* phantom_cmd =
        app.add_subcommand("phantom", "generate the synthetic two-hemisphere test subject");

    CLI11_PARSE(app, argc, argv);

    try {
        if (phantom_cmd->parsed()) {
            if (opts.subject_dir.empty() || opts.label_table.empty()) {
                std::fprintf(stderr, "cortexkit: phantom requires --subject-dir and --label-table\n");
                return 1;
            }
            cortexkit::pipeline::phantom(opts.subject_dir, opts.seed, opts.label_table);
            return 0;
        }
        if (all_cmd->parsed()) return run_stages(opts, cortexkit::pipeline::all_stages());
        for (const auto& [stage, cmd] : stage_commands)
            if (cmd->parsed()) return run_stages(opts, {stage});
    } catch (const cortexkit::Error& e) {
        std::fprintf(stderr, "cortexkit: %s\n", e.what());
        return e.kind() == cortexkit::ErrorKind::Input ? 1 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "cortexkit: %s\n", e.what());
        return 2;
    }
    return 1;
}
