#pragma once

#include <chrono>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace dng::log {

// stderr logging; arguments are streamed in order.
template <typename... Args>
void write(const char* level, const Args&... args) {
    using clock = std::chrono::system_clock;
    const auto now = clock::to_time_t(clock::now());
    std::ostringstream line;
    line << std::put_time(std::localtime(&now), "%H:%M:%S") << " [" << level << "] ";
    (line << ... << args);
    line << '\n';
    std::cerr << line.str();
}

template <typename... Args>
void info(const Args&... args) { write("info", args...); }

template <typename... Args>
void error(const Args&... args) { write("error", args...); }

}  // namespace dng::log
