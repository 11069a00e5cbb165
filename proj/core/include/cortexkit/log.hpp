// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iostream>
#include <sstream>

namespace cortexkit::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Threshold comes from CORTEXKIT_LOG ({error,warn,info,debug}); default warn.
Level threshold();

bool enabled(Level level);

namespace detail {
void emit(Level level, const std::string& line);
}

template <class... Args>
void write(Level level, Args&&... args) {
    if (!enabled(level)) return;
    std::ostringstream os;
    (os << ... << args);
    detail::emit(level, os.str());
}

template <class... Args> void error(Args&&... args) { write(Level::Error, std::forward<Args>(args)...); }
template <class... Args> void warn(Args&&... args) { write(Level::Warn, std::forward<Args>(args)...); }
template <class... Args> void info(Args&&... args) { write(Level::Info, std::forward<Args>(args)...); }
template <class... Args> void debug(Args&&... args) { write(Level::Debug, std::forward<Args>(args)...); }

} // namespace cortexkit::log
