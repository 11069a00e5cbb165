// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "cortexkit/label_table.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "cortexkit/errors.hpp"
#include "cortexkit/log.hpp"

namespace cortexkit {

Laterality laterality_from_string(const std::string& s) {
    if (s == "Left") return Laterality::Left;
    if (s == "Right") return Laterality::Right;
    if (s == "Midline") return Laterality::Midline;
    if (s == "MergedPair") return Laterality::MergedPair;
    throw BadLaterality("unknown laterality '" + s + "'");
}

std::string to_string(Laterality l) {
    switch (l) {
    case Laterality::Left: return "Left";
    case Laterality::Right: return "Right";
    case Laterality::Midline: return "Midline";
    case Laterality::MergedPair: return "MergedPair";
    }
    return "?";
}

LabelTable::LabelTable(std::vector<LabelTableEntry> entries) : entries_(std::move(entries)) {
    std::set<int> fs_seen;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (!by_id_.emplace(e.internal_id, i).second)
            throw DuplicateId("duplicate internal_id " + std::to_string(e.internal_id));
        if (!fs_seen.insert(e.fs_code_left()).second)
            throw DuplicateId("duplicate fs_code " + std::to_string(e.fs_code_left()));
        if (e.laterality == Laterality::MergedPair &&
            !fs_seen.insert(e.fs_code_right()).second)
            throw DuplicateId("duplicate fs_code " + std::to_string(e.fs_code_right()));
    }
}

const LabelTableEntry* LabelTable::find(std::uint16_t internal_id) const {
    auto it = by_id_.find(internal_id);
    return it == by_id_.end() ? nullptr : &entries_[it->second];
}

int LabelTable::fs_code_count() const {
    int n = 0;
    for (const auto& e : entries_) n += e.laterality == Laterality::MergedPair ? 2 : 1;
    return n;
}

std::uint16_t LabelTable::sagittal_id(std::uint16_t internal_id) const {
    const auto* e = find(internal_id);
    if (e && e->sagittal_merge_id) return *e->sagittal_merge_id;
    return internal_id;
}

std::vector<std::uint16_t> LabelTable::sagittal_class_ids() const {
    std::set<std::uint16_t> ids;
    for (const auto& e : entries_) ids.insert(sagittal_id(e.internal_id));
    return {ids.begin(), ids.end()};
}

std::optional<LabelTable::LateralPair> LabelTable::lateral_pair_of(std::uint16_t merge_id) const {
    std::optional<std::uint16_t> left, right;
    for (const auto& e : entries_) {
        if (!e.sagittal_merge_id || *e.sagittal_merge_id != merge_id) continue;
        if (e.laterality == Laterality::Left) left = e.internal_id;
        if (e.laterality == Laterality::Right) right = e.internal_id;
    }
    if (left && right) return LateralPair{*left, *right};
    return std::nullopt;
}

const LabelTableEntry* LabelTable::white_matter(Laterality side) const {
    const int code = side == Laterality::Left ? 2 : 41;
    for (const auto& e : entries_)
        if (e.fs_code == code) return &e;
    return nullptr;
}

bool LabelTable::padding_excluded(std::uint16_t internal_id) const {
    const auto* e = find(internal_id);
    if (!e) return false;
    return e->name.find("lateralorbitofrontal") != std::string::npos ||
           e->name.find("parsorbitalis") != std::string::npos;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == '\t') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \r\n");
    auto e = s.find_last_not_of(" \r\n");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

} // namespace

LabelTable read_label_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open label table " + path);

    std::vector<LabelTableEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (lineno == 1 && t.rfind("internal_id", 0) == 0) continue; // header

        auto fields = split_tabs(line);
        if (fields.size() < 4)
            throw IoFailure("label table line " + std::to_string(lineno) + ": expected 5 columns");
        LabelTableEntry e;
        e.internal_id = std::uint16_t(std::stoul(trim(fields[0])));
        e.name = trim(fields[1]);
        e.laterality = laterality_from_string(trim(fields[3]));

        // MergedPair rows reference two FS codes, either explicitly
        // ("1003,2003") or as the left code with right = left + 1000.
        std::string fs = trim(fields[2]);
        auto comma = fs.find(',');
        if (comma != std::string::npos) {
            if (e.laterality != Laterality::MergedPair)
                throw BadLaterality("two fs codes on non-merged row, line " + std::to_string(lineno));
            e.fs_code = std::stoi(trim(fs.substr(0, comma)));
            e.fs_code_pair_right = std::stoi(trim(fs.substr(comma + 1)));
        } else {
            e.fs_code = std::stoi(fs);
            if (e.laterality == Laterality::MergedPair) e.fs_code_pair_right = e.fs_code + 1000;
        }

        if (fields.size() >= 5) {
            std::string merge = trim(fields[4]);
            if (!merge.empty()) e.sagittal_merge_id = std::uint16_t(std::stoul(merge));
        }
        entries.push_back(std::move(e));
    }
    return LabelTable(std::move(entries));
}

void write_label_table(const LabelTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot write label table " + path);
    out << "internal_id\tname\tfs_code\tlaterality\tsagittal_merge_id\n";
    for (const auto& e : table.entries()) {
        out << e.internal_id << '\t' << e.name << '\t' << e.fs_code;
        if (e.laterality == Laterality::MergedPair && e.fs_code_pair_right != e.fs_code + 1000)
            out << ',' << e.fs_code_pair_right;
        out << '\t' << to_string(e.laterality) << '\t';
        if (e.sagittal_merge_id) out << *e.sagittal_merge_id;
        out << '\n';
    }
    if (!out) throw IoFailure("short write on " + path);
}

} // namespace cortexkit
