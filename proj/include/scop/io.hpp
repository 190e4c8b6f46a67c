#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace scop {

/// Writes to `<path>.tmp` and renames over `path`, so readers never see a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// skipped. Throws ParseError on a line without '='.
std::map<std::string, std::string> parse_key_values(std::string_view text);
std::string format_key_values(const std::map<std::string, std::string>& values);

std::string trim(std::string_view s);

}  // namespace scop
