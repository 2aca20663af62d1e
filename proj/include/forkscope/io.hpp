#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace forkscope {

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

using CsvRow = std::vector<std::string>;

std::string csv_escape(std::string_view cell);
std::string csv_line(const CsvRow& row);

/// RFC 4180 style reader (quoted cells, doubled quotes, CRLF tolerated).
std::vector<CsvRow> parse_csv(std::string_view text);

/// Shortest round-trippable decimal form; stable across runs.
std::string format_double(double v);

}  // namespace forkscope
