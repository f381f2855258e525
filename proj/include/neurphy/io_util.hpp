#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace neurphy {

/// Decimal rendering used by every text output: 17 significant digits,
/// enough to round-trip any double.
std::string format_real(double value);

/// Writes `contents` to `path` via a sibling temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

/// Lower-case hex SHA-256 of a byte string / file.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace neurphy
