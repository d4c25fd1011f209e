#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace refine_loop {

enum class LogLevel { Debug, Info, Warn, Error };

using LogSink = std::function<void(LogLevel, std::string_view)>;

// Replaces the process-wide sink; returns the previous one. The default sink
// writes Warn and above to stderr.
LogSink set_log_sink(LogSink sink);

void log(LogLevel level, std::string_view message);

inline void log_warn(std::string_view message) { log(LogLevel::Warn, message); }
inline void log_info(std::string_view message) { log(LogLevel::Info, message); }

}  // namespace refine_loop
