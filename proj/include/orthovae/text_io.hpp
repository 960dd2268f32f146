#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace orthovae::text {

/// Shortest representation that parses back to the same double.
std::string format_double(double v);
/// Strict parse; accepts "nan", "inf", "-inf". Throws ConfigError otherwise.
double parse_double(std::string_view s);

std::vector<std::string_view> split(std::string_view line, char sep);

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace orthovae::text
