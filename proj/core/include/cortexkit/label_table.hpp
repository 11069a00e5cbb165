// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace cortexkit {

enum class Laterality { Left, Right, Midline, MergedPair };

Laterality laterality_from_string(const std::string& s); // throws BadLaterality
std::string to_string(Laterality l);

/// One row of the segmentation label table. Non-merged entries map to a
/// single FreeSurfer code; MergedPair entries own a (left, right) pair.
struct LabelTableEntry {
    std::uint16_t internal_id = 0;
    std::string name;
    int fs_code = 0;                         // left code for MergedPair entries
    Laterality laterality = Laterality::Midline;
    std::optional<std::uint16_t> sagittal_merge_id;

    int fs_code_left() const { return fs_code; }
    int fs_code_right() const { return laterality == Laterality::MergedPair ? fs_code_pair_right : fs_code; }

    int fs_code_pair_right = 0; // only meaningful for MergedPair

    /// FreeSurfer cortical parcels live in the 1000/2000 ranges.
    bool is_cortical() const { return fs_code >= 1000; }
};

class LabelTable {
public:
    LabelTable() = default;
    explicit LabelTable(std::vector<LabelTableEntry> entries); // validates uniqueness

    const std::vector<LabelTableEntry>& entries() const { return entries_; }
    const LabelTableEntry* find(std::uint16_t internal_id) const;
    bool contains(std::uint16_t internal_id) const { return find(internal_id) != nullptr; }

    /// Total FS codes after lateral expansion (MergedPair counts two).
    int fs_code_count() const;

    /// internal id -> sagittal class id (identity when no merge is defined).
    std::uint16_t sagittal_id(std::uint16_t internal_id) const;
    /// Distinct sagittal class ids over the whole table.
    std::vector<std::uint16_t> sagittal_class_ids() const;

    /// The lh/rh internal ids collapsing onto `merge_id`, if `merge_id` is the
    /// shared sagittal id of a lateral pair.
    struct LateralPair { std::uint16_t left, right; };
    std::optional<LateralPair> lateral_pair_of(std::uint16_t merge_id) const;

    /// Cerebral white matter entries (FS codes 2 / 41), used for lateralization.
    const LabelTableEntry* white_matter(Laterality side) const;

    /// Cortical labels excluded from brainmask padding (lateral orbital
    /// frontal, pars orbitalis).
    bool padding_excluded(std::uint16_t internal_id) const;

private:
    std::vector<LabelTableEntry> entries_;
    std::unordered_map<std::uint16_t, std::size_t> by_id_;
};

LabelTable read_label_table(const std::string& path);
void write_label_table(const LabelTable& table, const std::string& path);

} // namespace cortexkit
