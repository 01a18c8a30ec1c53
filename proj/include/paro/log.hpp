#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace paro {

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

/// Level read once from PARO_LOG_LEVEL (quiet|info|debug, default info).
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("PARO_LOG_LEVEL");
    if (env == nullptr) return LogLevel::info;
    if (std::strcmp(env, "quiet") == 0) return LogLevel::quiet;
    if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
    return LogLevel::info;
  }();
  return level;
}

template <typename... Args>
void log_info(const char* fmt, Args... args) {
  if (log_level() >= LogLevel::info) {
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
  }
}

template <typename... Args>
void log_debug(const char* fmt, Args... args) {
  if (log_level() >= LogLevel::debug) {
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
  }
}

}  // namespace paro
