#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kkl/matrix.hpp"

namespace kkl::io {

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it into place.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

/// Numeric CSV with header `t,<prefix>1,...,<prefix>m`.
struct Table {
    Vector times;
    Matrix values;
};

std::string format_table(std::span<const double> times, const Matrix& values, std::string_view prefix);
void write_table(const std::filesystem::path& path, std::span<const double> times, const Matrix& values,
                 std::string_view prefix);

/// Parses a table, checking the header against `prefix`, rejecting ragged rows
/// and non-increasing times. Errors carry the file name and line number.
Table read_table(const std::filesystem::path& path, std::string_view prefix);
Table parse_table(std::string_view text, std::string_view prefix, std::string_view source_name);

}  // namespace kkl::io
