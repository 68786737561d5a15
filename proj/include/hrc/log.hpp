#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace hrc::logging {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3 };

// Verbosity comes from the HRC_LOG environment variable
// (debug|info|warn|error); default is warn. Diagnostics go to stderr so
// machine-readable stdout stays clean.
inline Level threshold() {
  static const Level cached = [] {
    const char* env = std::getenv("HRC_LOG");
    if (env == nullptr) return Level::Warn;
    if (std::strcmp(env, "debug") == 0) return Level::Debug;
    if (std::strcmp(env, "info") == 0) return Level::Info;
    if (std::strcmp(env, "warn") == 0) return Level::Warn;
    if (std::strcmp(env, "error") == 0) return Level::Error;
    return Level::Warn;
  }();
  return cached;
}

inline void log(Level level, const std::string& msg) {
  if (level < threshold()) return;
  const char* tag = level == Level::Debug  ? "debug"
                    : level == Level::Info ? "info"
                    : level == Level::Warn ? "warn"
                                           : "error";
  std::fprintf(stderr, "[%s] %s\n", tag, msg.c_str());
}

inline void debug(const std::string& msg) { log(Level::Debug, msg); }
inline void info(const std::string& msg) { log(Level::Info, msg); }
inline void warn(const std::string& msg) { log(Level::Warn, msg); }
inline void error(const std::string& msg) { log(Level::Error, msg); }

}  // namespace hrc::logging
