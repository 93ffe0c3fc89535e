#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "kkl/error.hpp"
#include "kkl/io.hpp"

namespace kkl::io {

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    if (res.ec != std::errc()) throw Error("format_double failed");
    return std::string(buf, res.ptr);
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed: " + path.string());
    return ss.str();
}

void write_text_atomic(const std::filesystem::path& path, std::string_view content) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string format_table(std::span<const double> times, const Matrix& values, std::string_view prefix) {
    if (times.size() != values.rows()) throw ValidationError("table: time count does not match row count");
    std::string out = "t";
    for (std::size_t j = 0; j < values.cols(); ++j) {
        out += ',';
        out += prefix;
        out += std::to_string(j + 1);
    }
    out += '\n';
    for (std::size_t i = 0; i < values.rows(); ++i) {
        out += format_double(times[i]);
        for (double v : values.row(i)) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

void write_table(const std::filesystem::path& path, std::span<const double> times, const Matrix& values,
                 std::string_view prefix) {
    write_text_atomic(path, format_table(times, values, prefix));
}

namespace {

[[noreturn]] void fail(std::string_view source, std::size_t line, const std::string& what) {
    throw ParseError(std::string(source) + ":" + std::to_string(line) + ": " + what);
}

double parse_number(std::string_view field, std::string_view source, std::size_t line) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (last[-1] == ' ' || last[-1] == '\t')) --last;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last || first == last)
        fail(source, line, "invalid number '" + std::string(field) + "'");
    if (!std::isfinite(value)) fail(source, line, "non-finite number '" + std::string(field) + "'");
    return value;
}

}  // namespace

Table parse_table(std::string_view text, std::string_view prefix, std::string_view source) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        pos = nl + 1;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) fail(source, 1, "empty file");

    std::size_t columns = 0;
    {
        std::string_view header = lines[0];
        std::size_t start = 0;
        std::size_t index = 0;
        for (;;) {
            std::size_t comma = header.find(',', start);
            std::string_view name = header.substr(start, comma == std::string_view::npos ? header.npos : comma - start);
            const std::string expected = index == 0 ? "t" : std::string(prefix) + std::to_string(index);
            if (name != expected)
                fail(source, 1, "unexpected header column '" + std::string(name) + "', expected '" + expected + "'");
            ++index;
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        columns = index - 1;
    }
    if (columns == 0) fail(source, 1, "header has no value columns");
    if (lines.size() < 2) fail(source, 2, "no data rows");

    Table table;
    table.values = Matrix(lines.size() - 1, columns);
    table.times.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::string_view line = lines[i];
        std::size_t start = 0;
        std::size_t field = 0;
        for (;;) {
            std::size_t comma = line.find(',', start);
            std::string_view token = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
            if (field > columns)
                fail(source, i + 1, "too many fields (expected " + std::to_string(columns + 1) + ")");
            const double v = parse_number(token, source, i + 1);
            if (field == 0)
                table.times.push_back(v);
            else
                table.values(i - 1, field - 1) = v;
            ++field;
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (field != columns + 1)
            fail(source, i + 1,
                 "ragged row with " + std::to_string(field) + " fields (expected " + std::to_string(columns + 1) + ")");
        if (i > 1 && !(table.times[i - 1] > table.times[i - 2]))
            fail(source, i + 1, "time is not strictly increasing");
    }
    return table;
}

Table read_table(const std::filesystem::path& path, std::string_view prefix) {
    return parse_table(read_text(path), prefix, path.string());
}

}  // namespace kkl::io
