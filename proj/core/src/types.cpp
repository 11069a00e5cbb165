// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "cortexkit/types.hpp"

#include <algorithm>

namespace cortexkit {

LabelVolume as_labels(const Volume& v) {
    LabelVolume out;
    out.header = v.header;
    out.header.dtype = Dtype::U16;
    if (const auto* u8 = std::get_if<std::vector<std::uint8_t>>(&v.data)) {
        out.values.assign(u8->begin(), u8->end());
    } else if (const auto* u16 = std::get_if<std::vector<std::uint16_t>>(&v.data)) {
        out.values = *u16;
    } else {
        throw UnsupportedDtype("F32 volume cannot carry labels");
    }
    return out;
}

FloatVolume as_floats(const Volume& v) {
    FloatVolume out;
    out.header = v.header;
    out.header.dtype = Dtype::F32;
    std::visit([&](const auto& data) { out.values.assign(data.begin(), data.end()); }, v.data);
    return out;
}

Volume to_volume(const LabelVolume& v) {
    Volume out;
    out.header = v.header;
    out.header.dtype = Dtype::U16;
    out.data = v.values;
    return out;
}

Volume to_volume(const BinaryMask& v) {
    Volume out;
    out.header = v.header;
    out.header.dtype = Dtype::U8;
    out.data = v.values;
    return out;
}

Volume to_volume(const FloatVolume& v) {
    Volume out;
    out.header = v.header;
    out.header.dtype = Dtype::F32;
    out.data = v.values;
    return out;
}

} // namespace cortexkit
