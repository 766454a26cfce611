#pragma once

#include <string_view>

namespace ala::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

// Reads ALA_LOG_LEVEL once; defaults to warn.
Level threshold();
void set_threshold(Level level);

void write(Level level, std::string_view message);

inline void error(std::string_view m) { write(Level::error, m); }
inline void warn(std::string_view m) { write(Level::warn, m); }
inline void info(std::string_view m) { write(Level::info, m); }
inline void debug(std::string_view m) { write(Level::debug, m); }

}  // namespace ala::log
