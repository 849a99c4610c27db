#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace nfdrl {

/// Shortest round-trip-safe text for a double: 17 significant digits.
std::string format_double(double v);

/// Writes `contents` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

enum class LogLevel { error = 0, info = 1, debug = 2 };

/// Level from NFDRL_LOG (error|info|debug); info when unset or unrecognised.
LogLevel log_level();
void log(LogLevel level, std::string_view message);

}  // namespace nfdrl
