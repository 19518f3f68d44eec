#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace boars::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline Level parse_level(const char* s) {
  if (!s) return Level::Warn;
  const std::string v(s);
  if (v == "error") return Level::Error;
  if (v == "info") return Level::Info;
  if (v == "debug") return Level::Debug;
  return Level::Warn;
}

// Read once from BOARS_LOG (error|warn|info|debug).
inline Level threshold() {
  static const Level level = parse_level(std::getenv("BOARS_LOG"));
  return level;
}

inline void write(Level level, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  static std::mutex mu;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard lock(mu);
  std::cerr << "[boars " << names[static_cast<int>(level)] << "] " << msg << '\n';
}

inline void error(const std::string& m) { write(Level::Error, m); }
inline void warn(const std::string& m) { write(Level::Warn, m); }
inline void info(const std::string& m) { write(Level::Info, m); }
inline void debug(const std::string& m) { write(Level::Debug, m); }

}  // namespace boars::log
