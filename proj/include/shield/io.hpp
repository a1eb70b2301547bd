#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace shield {

/// Shortest round-trip decimal form of a double ("inf", "-inf", "nan" for specials).
std::string format_double(double v);

/// Writes `content` to a temporary sibling file, then renames it over `path`.
/// Throws std::runtime_error on any I/O failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view data);

}  // namespace shield
