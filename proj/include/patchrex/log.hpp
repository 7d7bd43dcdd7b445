#pragma once

#include <sstream>
#include <string>

namespace patchrex {

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Level comes from the PATCHREX_LOG env var (error|warn|info|debug), default info.
LogLevel log_level();
void set_log_level(LogLevel level);
void log_msg(LogLevel level, const std::string& msg);

inline void log_error(const std::string& msg) { log_msg(LogLevel::kError, msg); }
inline void log_warn(const std::string& msg) { log_msg(LogLevel::kWarn, msg); }
inline void log_info(const std::string& msg) { log_msg(LogLevel::kInfo, msg); }
inline void log_debug(const std::string& msg) { log_msg(LogLevel::kDebug, msg); }

}  // namespace patchrex
