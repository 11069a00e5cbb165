// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cortexkit/label_table.hpp"
#include "cortexkit/types.hpp"

namespace cortexkit::evalstats {

struct LabelMaskPair {
    BinaryMask truth;      // G
    BinaryMask prediction; // P
};

/// 2|G n P| / (|G| + |P|); 1 when both masks are empty (logged convention).
double dice(const LabelMaskPair& pair);

/// Sum of the two directed mean nearest-neighbor distances (mm between
/// voxel centers); `halved` divides by two, the alternative convention
/// found in parts of the literature.
double avg_hausdorff(const LabelMaskPair& pair, bool halved = false);

struct LabelMetrics {
    std::optional<double> dice;   // absent when the label is in neither volume
    std::optional<double> avg_hd; // absent when either side lacks the label
};

struct PerLabelReport {
    std::map<std::uint16_t, LabelMetrics> per_label;
    std::optional<double> cortical_mean_dice;
    std::optional<double> subcortical_mean_dice;
};
PerLabelReport dice_per_label(const LabelVolume& truth, const LabelVolume& prediction,
                              const LabelTable& table);

struct IccResult {
    double icc = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

/// Two-way random-effects absolute-agreement single-measure ICC(A,1) with
/// alpha = 0.05 bounds (F quantiles via the inverse regularized incomplete
/// beta). Rows are subjects, columns repeats.
IccResult icc_absolute(const Eigen::MatrixXd& measurements);

struct SubjectRow {
    std::string id;
    std::string diagnosis; // "CN" is the reference group
    double age = 0.0;
    int sex = 0;
    double head_size = 0.0;
};

struct MeasureTable {
    std::vector<SubjectRow> subjects;
    std::vector<std::string> roi_names;
    Eigen::MatrixXd values; // subjects x ROIs
};

struct GlmResult {
    double beta_dx = 0.0;
    double t = 0.0;
    double signed_p = 0.0; // sign(beta) * two-sided p
};

/// OLS of measure ~ 1 + dx + age + sex (+ head_size), dx = diagnosis != CN.
GlmResult glm_group(const MeasureTable& table, const std::string& roi, bool use_head_size);

struct WilcoxonResult {
    double w = 0.0; // min(T+, T-)
    double p = 0.0; // two-sided, normal approximation
};

/// Signed-rank test: zero differences dropped, tied ranks averaged,
/// continuity-corrected normal approximation with tie-corrected variance.
/// Requires at least 6 nonzero pairs.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y);

// Distribution helpers (regularized incomplete beta backed; relative
// tolerance 1e-10, no lookup tables).
double regularized_incomplete_beta(double a, double b, double x);
double normal_cdf(double z);
double student_t_two_sided_p(double t, double dof);
double f_quantile(double prob, double d1, double d2);

// CSV emitters for the report formats.
struct DiceRow {
    std::string label;
    std::optional<double> dice;
    std::optional<double> avg_hd;
};
void write_dice_csv(const std::vector<DiceRow>& rows, const std::string& path);

struct GlmRow {
    std::string roi;
    GlmResult result;
};
void write_glm_csv(const std::vector<GlmRow>& rows, const std::string& path);

struct IccRow {
    std::string roi;
    IccResult result;
};
void write_icc_csv(const std::vector<IccRow>& rows, const std::string& path);

} // namespace cortexkit::evalstats
