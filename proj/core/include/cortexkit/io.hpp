// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "cortexkit/mesh.hpp"
#include "cortexkit/types.hpp"

namespace cortexkit::io {

// Volumes. The format is chosen by magic bytes on read ("FSLV" header or a
// NIfTI-1 subset) and by extension on write (".nii" -> NIfTI-1, else FSLV).
// NIfTI orientation matrices are ignored; the stored axis order is used
// as-is and a warning is logged.
Volume read_volume(const std::string& path);
void write_volume(const Volume& volume, const std::string& path);

// ASCII OFF meshes. Coordinates survive a round trip to 9 significant
// digits; one write is a fixed point of write(read(.)).
TriangleMesh read_mesh(const std::string& path);
void write_mesh(const TriangleMesh& mesh, const std::string& path);

// Generic CSV tables used by every stage output.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::string& path);
void write_csv(const CsvTable& table, const std::string& path);

// "roi,measure,value" stats rows.
struct StatsRow {
    std::string roi;
    std::string measure;
    double value = 0.0;
};
void write_stats_csv(const std::vector<StatsRow>& rows, const std::string& path);
std::vector<StatsRow> read_stats_csv(const std::string& path);

// "vertex_id,value" per-vertex maps.
void write_vertex_map_csv(const std::vector<double>& values, const std::string& path);
std::vector<double> read_vertex_map_csv(const std::string& path);

std::string format_double(double v); // canonical %.9g used by all writers

} // namespace cortexkit::io
