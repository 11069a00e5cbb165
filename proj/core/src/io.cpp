// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "cortexkit/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cortexkit/log.hpp"

namespace cortexkit::io {

namespace {

std::vector<char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path);
    in.seekg(0, std::ios::end);
    std::vector<char> buf(std::size_t(in.tellg()));
    in.seekg(0);
    in.read(buf.data(), std::streamsize(buf.size()));
    if (!in) throw IoFailure("read failed on " + path);
    return buf;
}

template <class T>
T read_le(const std::vector<char>& buf, std::size_t offset, const std::string& path) {
    if (offset + sizeof(T) > buf.size())
        throw TruncatedFile(path + ": need " + std::to_string(sizeof(T)) + " bytes at offset " +
                            std::to_string(offset) + ", file has " + std::to_string(buf.size()));
    T v;
    std::memcpy(&v, buf.data() + offset, sizeof(T)); // host is little-endian
    return v;
}

template <class T>
void append_le(std::string& out, T v) {
    char tmp[sizeof(T)];
    std::memcpy(tmp, &v, sizeof(T));
    out.append(tmp, sizeof(T));
}

template <class T>
std::vector<T> read_payload(const std::vector<char>& buf, std::size_t offset, std::size_t count,
                            const std::string& path) {
    if (offset + count * sizeof(T) > buf.size())
        throw TruncatedFile(path + ": payload of " + std::to_string(count * sizeof(T)) +
                            " bytes at offset " + std::to_string(offset) + " exceeds file size " +
                            std::to_string(buf.size()));
    std::vector<T> data(count);
    std::memcpy(data.data(), buf.data() + offset, count * sizeof(T));
    return data;
}

constexpr std::size_t kFslvHeaderSize = 32;

Volume read_fslv(const std::vector<char>& buf, const std::string& path) {
    const std::uint16_t version = read_le<std::uint16_t>(buf, 4, path);
    if (version != 1)
        throw BadMagic(path + ": unsupported FSLV version " + std::to_string(version) +
                       " at byte 4");
    const std::uint8_t dtype = read_le<std::uint8_t>(buf, 6, path);
    if (dtype > 2)
        throw UnsupportedDtype(path + ": dtype code " + std::to_string(int(dtype)) + " at byte 6");

    Volume v;
    for (int i = 0; i < 3; ++i)
        v.header.dims[i] = read_le<std::uint32_t>(buf, 8 + 4 * std::size_t(i), path);
    for (int i = 0; i < 3; ++i)
        v.header.voxel_size_mm[i] = read_le<float>(buf, 20 + 4 * std::size_t(i), path);
    v.header.dtype = static_cast<Dtype>(dtype);
    if (!v.header.valid()) throw BadMagic(path + ": invalid dims/voxel size in header");

    const std::size_t n = v.header.voxel_count();
    switch (v.header.dtype) {
    case Dtype::U8: v.data = read_payload<std::uint8_t>(buf, kFslvHeaderSize, n, path); break;
    case Dtype::U16: v.data = read_payload<std::uint16_t>(buf, kFslvHeaderSize, n, path); break;
    case Dtype::F32: v.data = read_payload<float>(buf, kFslvHeaderSize, n, path); break;
    }
    return v;
}

constexpr std::size_t kNiftiHeaderSize = 348;

Volume read_nifti(const std::vector<char>& buf, const std::string& path) {
    const char* magic = buf.data() + 344;
    if (std::memcmp(magic, "n+1\0", 4) != 0)
        throw BadMagic(path + ": NIfTI-1 magic mismatch at byte 344");

    const std::int16_t datatype = read_le<std::int16_t>(buf, 70, path);
    Dtype dtype;
    switch (datatype) {
    case 2: dtype = Dtype::U8; break;
    case 4: dtype = Dtype::U16; break;
    case 16: dtype = Dtype::F32; break;
    default:
        throw UnsupportedDtype(path + ": NIfTI datatype code " + std::to_string(datatype) +
                               " at byte 70");
    }

    const std::int16_t ndim = read_le<std::int16_t>(buf, 40, path);
    if (ndim < 1 || ndim > 7) throw BadMagic(path + ": implausible dim[0] at byte 40");
    Volume v;
    v.header.dtype = dtype;
    for (int i = 0; i < 3; ++i) {
        std::int16_t d = i < ndim ? read_le<std::int16_t>(buf, 42 + 2 * std::size_t(i), path)
                                  : std::int16_t(1);
        if (d < 1) d = 1;
        v.header.dims[i] = std::uint32_t(d);
    }
    for (int i = 3; i < ndim; ++i) {
        std::int16_t d = read_le<std::int16_t>(buf, 42 + 2 * std::size_t(i), path);
        if (d > 1)
            throw UnsupportedDtype(path + ": only 3D volumes supported, dim[" +
                                   std::to_string(i + 1) + "] = " + std::to_string(d));
    }
    for (int i = 0; i < 3; ++i) {
        float p = read_le<float>(buf, 80 + 4 * std::size_t(i), path); // pixdim[1..3]
        if (!(p > 0)) {
            log::warn("nifti: nonpositive pixdim[", i + 1, "] in ", path, ", using 1 mm");
            p = 1.0f;
        }
        v.header.voxel_size_mm[i] = p;
    }
    log::warn("nifti: orientation (sform/qform) ignored for ", path,
              "; stored axis order taken as-is");

    const float vox_offset = read_le<float>(buf, 108, path);
    if (vox_offset < float(kNiftiHeaderSize))
        throw BadMagic(path + ": vox_offset " + std::to_string(vox_offset) + " at byte 108");
    const auto offset = std::size_t(vox_offset);
    const std::size_t n = v.header.voxel_count();
    switch (dtype) {
    case Dtype::U8: v.data = read_payload<std::uint8_t>(buf, offset, n, path); break;
    case Dtype::U16: v.data = read_payload<std::uint16_t>(buf, offset, n, path); break;
    case Dtype::F32: v.data = read_payload<float>(buf, offset, n, path); break;
    }
    return v;
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open " + path + " for writing");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw IoFailure("short write on " + path);
}

template <class T>
void append_payload(std::string& out, const std::vector<T>& data) {
    const auto* p = reinterpret_cast<const char*>(data.data());
    out.append(p, data.size() * sizeof(T));
}

void write_fslv(const Volume& v, const std::string& path) {
    std::string out;
    out.reserve(kFslvHeaderSize + v.header.voxel_count() * std::size_t(dtype_size(v.dtype())));
    out.append("FSLV", 4);
    append_le<std::uint16_t>(out, 1);
    append_le<std::uint8_t>(out, std::uint8_t(v.dtype()));
    append_le<std::uint8_t>(out, 0);
    for (int i = 0; i < 3; ++i) append_le<std::uint32_t>(out, v.header.dims[i]);
    for (int i = 0; i < 3; ++i) append_le<float>(out, v.header.voxel_size_mm[i]);
    std::visit([&](const auto& data) { append_payload(out, data); }, v.data);
    write_file(path, out);
}

void write_nifti(const Volume& v, const std::string& path) {
    std::string hdr(kNiftiHeaderSize, '\0');
    auto put = [&hdr](std::size_t offset, auto value) {
        std::memcpy(hdr.data() + offset, &value, sizeof(value));
    };
    put(0, std::int32_t(kNiftiHeaderSize));
    put(40, std::int16_t(3)); // dim[0]
    for (int i = 0; i < 3; ++i) put(42 + 2 * std::size_t(i), std::int16_t(v.header.dims[i]));
    for (int i = 3; i < 7; ++i) put(42 + 2 * std::size_t(i), std::int16_t(1));
    std::int16_t datatype = 2, bitpix = 8;
    switch (v.dtype()) {
    case Dtype::U8: datatype = 2; bitpix = 8; break;
    case Dtype::U16: datatype = 4; bitpix = 16; break;
    case Dtype::F32: datatype = 16; bitpix = 32; break;
    }
    put(70, datatype);
    put(72, bitpix);
    put(76, 1.0f); // pixdim[0]
    for (int i = 0; i < 3; ++i) put(80 + 4 * std::size_t(i), v.header.voxel_size_mm[i]);
    put(108, 352.0f); // vox_offset
    std::memcpy(hdr.data() + 344, "n+1\0", 4);

    std::string out = hdr;
    out.append(4, '\0'); // no extensions
    std::visit([&](const auto& data) { append_payload(out, data); }, v.data);
    write_file(path, out);
}

bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

Volume read_volume(const std::string& path) {
    auto buf = read_file(path);
    if (buf.size() >= 4 && std::memcmp(buf.data(), "FSLV", 4) == 0) return read_fslv(buf, path);
    if (buf.size() >= kNiftiHeaderSize &&
        read_le<std::int32_t>(buf, 0, path) == std::int32_t(kNiftiHeaderSize))
        return read_nifti(buf, path);
    throw BadMagic(path + ": unrecognized magic at byte 0");
}

void write_volume(const Volume& volume, const std::string& path) {
    if (!volume.header.valid()) throw IoFailure("refusing to write invalid header to " + path);
    const std::size_t n = std::visit([](const auto& d) { return d.size(); }, volume.data);
    if (n != volume.header.voxel_count())
        throw IoFailure("payload size " + std::to_string(n) + " does not match dims for " + path);
    if (has_suffix(path, ".nii"))
        write_nifti(volume, path);
    else
        write_fslv(volume, path);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

TriangleMesh read_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path);

    int lineno = 0;
    auto next_line = [&](std::string& line) {
        while (std::getline(in, line)) {
            ++lineno;
            auto pos = line.find_first_not_of(" \t\r");
            if (pos == std::string::npos || line[pos] == '#') continue;
            return true;
        }
        return false;
    };

    std::string line;
    if (!next_line(line)) throw MalformedOff(path + ": empty file");
    {
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok != "OFF")
            throw MalformedOff(path + ": expected OFF header at line " + std::to_string(lineno));
    }
    if (!next_line(line)) throw MalformedOff(path + ": missing counts line");
    long nv = 0, nf = 0, ne = 0;
    {
        std::istringstream ss(line);
        if (!(ss >> nv >> nf >> ne) || nv < 0 || nf < 0)
            throw MalformedOff(path + ": bad counts at line " + std::to_string(lineno));
    }

    TriangleMesh mesh;
    mesh.vertices.reserve(std::size_t(nv));
    for (long i = 0; i < nv; ++i) {
        if (!next_line(line))
            throw MalformedOff(path + ": expected vertex " + std::to_string(i) + " after line " +
                               std::to_string(lineno));
        std::istringstream ss(line);
        double x, y, z;
        if (!(ss >> x >> y >> z))
            throw MalformedOff(path + ": bad vertex at line " + std::to_string(lineno));
        mesh.vertices.emplace_back(x, y, z);
    }
    mesh.faces.reserve(std::size_t(nf));
    for (long i = 0; i < nf; ++i) {
        if (!next_line(line))
            throw MalformedOff(path + ": expected face " + std::to_string(i) + " after line " +
                               std::to_string(lineno));
        std::istringstream ss(line);
        int arity, a, b, c;
        if (!(ss >> arity >> a >> b >> c) || arity != 3)
            throw MalformedOff(path + ": non-triangle face at line " + std::to_string(lineno));
        for (int idx : {a, b, c})
            if (idx < 0 || idx >= nv)
                throw MalformedOff(path + ": vertex index " + std::to_string(idx) +
                                   " out of range at line " + std::to_string(lineno));
        if (a == b || b == c || a == c)
            throw MalformedOff(path + ": degenerate face at line " + std::to_string(lineno));
        mesh.faces.push_back({a, b, c});
    }
    return mesh;
}

void write_mesh(const TriangleMesh& mesh, const std::string& path) {
    std::ostringstream out;
    out << "OFF\n" << mesh.vertex_count() << ' ' << mesh.face_count() << " 0\n";
    for (const auto& v : mesh.vertices)
        out << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z())
            << '\n';
    for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    write_file(path, out.str());
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path);
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        fields.push_back(cur);
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            table.rows.push_back(std::move(fields));
        }
    }
    return table;
}

void write_csv(const CsvTable& table, const std::string& path) {
    std::ostringstream out;
    auto emit = [&out](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out << ',';
            out << fields[i];
        }
        out << '\n';
    };
    emit(table.header);
    for (const auto& row : table.rows) emit(row);
    write_file(path, out.str());
}

void write_stats_csv(const std::vector<StatsRow>& rows, const std::string& path) {
    CsvTable table;
    table.header = {"roi", "measure", "value"};
    for (const auto& r : rows) table.rows.push_back({r.roi, r.measure, format_double(r.value)});
    write_csv(table, path);
}

std::vector<StatsRow> read_stats_csv(const std::string& path) {
    auto table = read_csv(path);
    std::vector<StatsRow> rows;
    for (const auto& r : table.rows) {
        if (r.size() < 3) throw IoFailure("bad stats row in " + path);
        rows.push_back({r[0], r[1], std::stod(r[2])});
    }
    return rows;
}

void write_vertex_map_csv(const std::vector<double>& values, const std::string& path) {
    CsvTable table;
    table.header = {"vertex_id", "value"};
    for (std::size_t i = 0; i < values.size(); ++i)
        table.rows.push_back({std::to_string(i), format_double(values[i])});
    write_csv(table, path);
}

std::vector<double> read_vertex_map_csv(const std::string& path) {
    auto table = read_csv(path);
    std::vector<double> values(table.rows.size());
    for (const auto& r : table.rows) {
        if (r.size() < 2) throw IoFailure("bad vertex map row in " + path);
        auto idx = std::size_t(std::stoul(r[0]));
        if (idx >= values.size()) throw IoFailure("vertex id out of order in " + path);
        values[idx] = std::stod(r[1]);
    }
    return values;
}

} // namespace cortexkit::io
