#include "patchrex/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace patchrex {

namespace {

LogLevel parse_env_level() {
  const char* env = std::getenv("PATCHREX_LOG");
  if (env == nullptr) return LogLevel::kInfo;
  std::string s(env);
  if (s == "error") return LogLevel::kError;
  if (s == "warn") return LogLevel::kWarn;
  if (s == "info") return LogLevel::kInfo;
  if (s == "debug") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

LogLevel& level_storage() {
  static LogLevel level = parse_env_level();
  return level;
}

const char* level_tag(LogLevel level) {
  switch (level) {
    case LogLevel::kError: return "error";
    case LogLevel::kWarn: return "warn";
    case LogLevel::kInfo: return "info";
    case LogLevel::kDebug: return "debug";
  }
  return "?";
}

std::mutex log_mutex;

}  // namespace

LogLevel log_level() { return level_storage(); }

void set_log_level(LogLevel level) { level_storage() = level; }

void log_msg(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  std::lock_guard<std::mutex> lock(log_mutex);
  std::cerr << "[patchrex:" << level_tag(level) << "] " << msg << "\n";
}

}  // namespace patchrex
