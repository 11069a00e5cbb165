// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "cortexkit/log.hpp"

#include <cstdlib>
#include <mutex>
#include <string>

namespace cortexkit::log {

namespace {

Level parse_env() {
    const char* env = std::getenv("CORTEXKIT_LOG");
    if (!env) return Level::Warn;
    std::string s(env);
    if (s == "error") return Level::Error;
    if (s == "warn") return Level::Warn;
    if (s == "info") return Level::Info;
    if (s == "debug") return Level::Debug;
    return Level::Warn;
}

const char* tag(Level level) {
    switch (level) {
    case Level::Error: return "error";
    case Level::Warn: return "warn";
    case Level::Info: return "info";
    case Level::Debug: return "debug";
    }
    return "?";
}

std::mutex& emit_mutex() {
    static std::mutex m;
    return m;
}

} // namespace

Level threshold() {
    static Level level = parse_env();
    return level;
}

bool enabled(Level level) { return int(level) <= int(threshold()); }

void detail::emit(Level level, const std::string& line) {
    std::lock_guard<std::mutex> lock(emit_mutex());
    std::cerr << "[cortexkit:" << tag(level) << "] " << line << '\n';
}

} // namespace cortexkit::log
