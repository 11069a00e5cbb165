// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cortexkit/netref.hpp"
#include "cortexkit/types.hpp"

namespace cortexkit::pipeline {

enum class Stage { Conform, Mask, Surf, Sphere, Map, Thickness, Metrics, Stats };

Stage stage_from_string(const std::string& name);
std::string to_string(Stage stage);
const std::vector<Stage>& all_stages(); // dependency order

enum class Hemi { Left, Right };
enum class HemiChoice { Left, Right, Both };

struct PipelineConfig {
    std::string subject_dir;
    std::string label_table;          // defaults to <subject_dir>/input/labels.tsv
    std::vector<Stage> stages;        // must respect dependency order
    int threads = 1;
    HemiChoice hemi = HemiChoice::Both;
    std::uint64_t seed = 0;
    netref::ViewWeights view_weights;
};

struct StageTiming {
    std::string stage;
    std::string hemi; // "lh", "rh" or "all"
    double seconds = 0.0;
};

struct RunReport {
    int exit_code = 0; // 0 ok, 1 input error, 2 numerical failure
    std::string error;
    std::vector<StageTiming> timings;
};

/// Run the requested stages; each writes under <subject_dir>/<stage>/.
/// The timing CSV ("stage,hemi,seconds") is always written, even on failure.
RunReport run(const PipelineConfig& config);

/// Deterministic 64^3 two-hemisphere phantom: nested WM/GM spheres of known
/// radii plus a midline blob, written with its ground-truth manifest under
/// <out_dir>/input/.
struct PhantomManifest {
    double thickness_mm = 0.0;
    std::map<std::uint16_t, double> label_volumes_mm3;
};
PhantomManifest phantom(const std::string& out_dir, std::uint64_t seed,
                        const std::string& label_table_path);

PhantomManifest read_manifest(const std::string& path);

} // namespace cortexkit::pipeline
