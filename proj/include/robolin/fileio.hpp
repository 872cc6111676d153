#pragma once

#include <string>

namespace robolin {

/// Writes `content` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// Shortest decimal that round-trips, independent of the C locale.
std::string format_double(double v);

}  // namespace robolin
