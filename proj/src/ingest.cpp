#include "kkl/ingest.hpp"

#include <glob.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "kkl/error.hpp"
#include "kkl/io.hpp"
#include "kkl/random.hpp"

namespace kkl {

void FrameSequence::validate() const {
    if (!(frame_interval > 0.0)) throw ValidationError("frame sequence: frame interval must be positive");
    for (std::size_t i = 0; i < frames.size(); ++i)
        if (frames[i].width != width || frames[i].height != height || frames[i].rgb.size() != 3 * width * height)
            throw ValidationError("frame sequence: frame " + std::to_string(i) + " has different dimensions");
}

std::string encode_ppm(const Image& image) {
    if (image.rgb.size() != 3 * image.width * image.height) throw ValidationError("encode_ppm: pixel buffer size");
    std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(image.rgb.data()), image.rgb.size());
    return out;
}

namespace {

[[noreturn]] void ppm_fail(std::string_view source, std::size_t offset, const std::string& what) {
    throw ParseError(std::string(source) + ": byte " + std::to_string(offset) + ": " + what);
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

// Skips whitespace and '#' comments, then reads an unsigned decimal.
std::size_t header_number(std::string_view bytes, std::size_t& pos, std::string_view source, const char* name) {
    for (;;) {
        while (pos < bytes.size() && is_space(bytes[pos])) ++pos;
        if (pos < bytes.size() && bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    const std::size_t start = pos;
    std::size_t value = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
        value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
        if (value > 1'000'000'000) ppm_fail(source, start, std::string(name) + " is too large");
        ++pos;
    }
    if (pos == start) ppm_fail(source, start, std::string("expected ") + name);
    return value;
}

}  // namespace

Image decode_ppm(std::string_view bytes, std::string_view source) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') ppm_fail(source, 0, "not a binary PPM (P6) file");
    std::size_t pos = 2;
    if (pos >= bytes.size() || !(is_space(bytes[pos]) || bytes[pos] == '#'))
        ppm_fail(source, pos, "expected whitespace after magic number");
    const std::size_t width = header_number(bytes, pos, source, "width");
    const std::size_t height = header_number(bytes, pos, source, "height");
    const std::size_t maxval_at = pos;
    const std::size_t maxval = header_number(bytes, pos, source, "maxval");
    if (width == 0 || height == 0) ppm_fail(source, maxval_at, "zero image dimension");
    if (maxval != 255) ppm_fail(source, maxval_at, "maxval must be 255, got " + std::to_string(maxval));
    if (pos >= bytes.size() || !is_space(bytes[pos])) ppm_fail(source, pos, "expected single whitespace after maxval");
    ++pos;
    const std::size_t need = 3 * width * height;
    if (bytes.size() - pos < need)
        ppm_fail(source, bytes.size(),
                 "truncated pixel data: expected " + std::to_string(need) + " bytes, found " +
                     std::to_string(bytes.size() - pos));
    if (bytes.size() - pos > need) ppm_fail(source, pos + need, "unexpected trailing data");
    Image img(width, height);
    std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), reinterpret_cast<char*>(img.rgb.data()));
    return img;
}

Image read_ppm(const std::filesystem::path& path) { return decode_ppm(io::read_text(path), path.string()); }

void write_ppm(const std::filesystem::path& path, const Image& image) { io::write_text_atomic(path, encode_ppm(image)); }

FrameSequence read_ppm_sequence(const std::filesystem::path& pattern, double frame_interval) {
    std::filesystem::path glob_pattern = pattern;
    if (std::filesystem::is_directory(pattern)) glob_pattern = pattern / "*.ppm";

    glob_t matches{};
    const int rc = ::glob(glob_pattern.c_str(), 0, nullptr, &matches);
    std::vector<std::string> files;
    if (rc == 0)
        for (std::size_t i = 0; i < matches.gl_pathc; ++i) files.emplace_back(matches.gl_pathv[i]);
    ::globfree(&matches);
    if (rc == GLOB_NOMATCH || files.empty()) throw IoError("no PPM files match " + glob_pattern.string());
    if (rc != 0) throw IoError("cannot list " + glob_pattern.string());
    std::sort(files.begin(), files.end());

    FrameSequence seq;
    seq.frame_interval = frame_interval;
    seq.frames.reserve(files.size());
    for (const auto& file : files) {
        Image img = read_ppm(file);
        if (seq.frames.empty()) {
            seq.width = img.width;
            seq.height = img.height;
        } else if (img.width != seq.width || img.height != seq.height) {
            throw ParseError(file + ": frame is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                             ", expected " + std::to_string(seq.width) + "x" + std::to_string(seq.height));
        }
        seq.frames.push_back(std::move(img));
    }
    seq.validate();
    return seq;
}

void write_ppm_sequence(const std::filesystem::path& directory, const FrameSequence& frames) {
    frames.validate();
    char name[32];
    for (std::size_t i = 0; i < frames.frames.size(); ++i) {
        std::snprintf(name, sizeof name, "frame_%06zu.ppm", i);
        write_ppm(directory / name, frames.frames[i]);
    }
}

OutputSeries extract_roi(const FrameSequence& frames, const Roi& roi) {
    frames.validate();
    if (frames.frames.empty()) throw ValidationError("extract_roi: no frames");
    if (roi.width == 0 || roi.height == 0) throw ValidationError("extract_roi: empty region");
    if (roi.x0 + roi.width > frames.width || roi.y0 + roi.height > frames.height)
        throw ValidationError("extract_roi: region exceeds the " + std::to_string(frames.width) + "x" +
                              std::to_string(frames.height) + " frame");
    const std::size_t pixels = roi.width * roi.height;
    Matrix y(frames.frames.size(), 3 * pixels);
    Vector times(frames.frames.size());
    for (std::size_t k = 0; k < frames.frames.size(); ++k) {
        times[k] = static_cast<double>(k) * frames.frame_interval;
        auto out = y.row(k);
        const Image& img = frames.frames[k];
        for (std::size_t r = 0; r < roi.height; ++r)
            for (std::size_t c = 0; c < roi.width; ++c) {
                const std::uint8_t* px = img.pixel(roi.x0 + c, roi.y0 + r);
                const std::size_t idx = r * roi.width + c;
                for (std::size_t ch = 0; ch < 3; ++ch) out[ch * pixels + idx] = px[ch] / 255.0;
            }
    }
    return OutputSeries(std::move(times), std::move(y), PlanarLayout{roi.width, roi.height});
}

Matrix channel_means(const OutputSeries& series) {
    if (!series.layout()) throw ValidationError("channel_means: series has no planar layout");
    const std::size_t pixels = series.layout()->pixels();
    Matrix means(series.size(), 3);
    for (std::size_t k = 0; k < series.size(); ++k) {
        auto row = series.values().row(k);
        for (std::size_t ch = 0; ch < 3; ++ch) {
            double s = 0.0;
            for (std::size_t i = 0; i < pixels; ++i) s += row[ch * pixels + i];
            means(k, ch) = s / static_cast<double>(pixels);
        }
    }
    return means;
}

ColorMap ColorMap::standard() {
    return ColorMap{Matrix{{1.6, -0.6, 0.4}, {-0.5, 1.2, 0.7}, {0.6, 0.5, -1.4}}, Vector{0.2, -0.1, 0.1}};
}

std::array<double, 3> ColorMap::operator()(std::span<const double> x) const {
    std::array<double, 3> rgb{};
    for (std::size_t c = 0; c < 3; ++c) {
        const double s = dot(coefficients.row(c), x) + offsets[c];
        rgb[c] = 1.0 / (1.0 + std::exp(-s));
    }
    return rgb;
}

FrameSequence render_synthetic_frames(const Trajectory& traj, std::size_t width, std::size_t height,
                                      const ColorMap& color_map, double noise, std::uint64_t seed) {
    if (width == 0 || height == 0) throw ValidationError("render_synthetic_frames: empty frame size");
    if (!(noise >= 0.0)) throw ValidationError("render_synthetic_frames: noise level must be non-negative");
    if (color_map.coefficients.rows() != 3 || color_map.coefficients.cols() != traj.dimension() ||
        color_map.offsets.size() != 3)
        throw ValidationError("render_synthetic_frames: colour map does not match the state dimension");
    if (traj.size() < 2 || !traj.is_uniform())
        throw ValidationError("render_synthetic_frames: trajectory must be uniformly sampled");

    const std::size_t n = traj.dimension();
    const auto& xs = traj.states();
    Vector mean(n, 0.0), sd(n, 0.0);
    for (std::size_t k = 0; k < xs.rows(); ++k)
        for (std::size_t j = 0; j < n; ++j) mean[j] += xs(k, j);
    for (double& m : mean) m /= static_cast<double>(xs.rows());
    for (std::size_t k = 0; k < xs.rows(); ++k)
        for (std::size_t j = 0; j < n; ++j) sd[j] += (xs(k, j) - mean[j]) * (xs(k, j) - mean[j]);
    for (double& s : sd) {
        s = std::sqrt(s / static_cast<double>(xs.rows() - 1));
        if (!(s > 0.0)) s = 1.0;
    }

    FrameSequence seq;
    seq.width = width;
    seq.height = height;
    seq.frame_interval = traj.interval();
    seq.frames.reserve(traj.size());
    Rng rng(seed);
    Vector standardized(n);
    for (std::size_t k = 0; k < traj.size(); ++k) {
        for (std::size_t j = 0; j < n; ++j) standardized[j] = (xs(k, j) - mean[j]) / sd[j];
        const auto base = color_map(standardized);
        Image img(width, height);
        for (std::size_t i = 0; i < width * height; ++i)
            for (std::size_t c = 0; c < 3; ++c) {
                double v = base[c];
                if (noise > 0.0) v += noise * rng.uniform(-1.0, 1.0);
                img.rgb[3 * i + c] = static_cast<std::uint8_t>(std::lround(std::clamp(255.0 * v, 0.0, 255.0)));
            }
        seq.frames.push_back(std::move(img));
    }
    return seq;
}

void write_csv_series(const std::filesystem::path& path, const OutputSeries& series) {
    io::write_table(path, series.times(), series.values(), "y");
}

OutputSeries read_csv_series(const std::filesystem::path& path) {
    auto table = io::read_table(path, "y");
    try {
        return OutputSeries(std::move(table.times), std::move(table.values));
    } catch (const ValidationError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace kkl
