#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kkl/matrix.hpp"
#include "kkl/series.hpp"

namespace kkl {

/// 8-bit RGB image, pixels interleaved row-major.
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> rgb;

    Image() = default;
    Image(std::size_t w, std::size_t h) : width(w), height(h), rgb(3 * w * h, 0) {}

    std::uint8_t* pixel(std::size_t x, std::size_t y) { return rgb.data() + 3 * (y * width + x); }
    const std::uint8_t* pixel(std::size_t x, std::size_t y) const { return rgb.data() + 3 * (y * width + x); }
};

struct FrameSequence {
    std::size_t width = 0;
    std::size_t height = 0;
    double frame_interval = 0.0;  // seconds per frame
    std::vector<Image> frames;

    void validate() const;
};

/// Rectangular pixel block; (x0, y0) is the top-left corner.
struct Roi {
    std::size_t x0 = 0;
    std::size_t y0 = 0;
    std::size_t width = 1;
    std::size_t height = 1;
};

/// Binary PPM (P6, maxval 255).
std::string encode_ppm(const Image& image);
Image decode_ppm(std::string_view bytes, std::string_view source_name);
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& image);

/// Loads every file matching `pattern` (a path whose file name may contain
/// glob wildcards; a directory means `<dir>/*.ppm`) in lexicographic order.
FrameSequence read_ppm_sequence(const std::filesystem::path& pattern, double frame_interval);

/// Writes frame_000000.ppm, frame_000001.ppm, ... into `directory`.
void write_ppm_sequence(const std::filesystem::path& directory, const FrameSequence& frames);

/// One output vector per frame: p = 3·w·h channel-planar values scaled to [0, 1].
OutputSeries extract_roi(const FrameSequence& frames, const Roi& roi);

/// Per-frame mean of each colour block, N × 3 (R, G, B). Needs planar layout.
Matrix channel_means(const OutputSeries& series);

/// Per-channel sigmoid of an affine combination of standardized states.
struct ColorMap {
    Matrix coefficients;  // 3 × n
    Vector offsets;       // 3

    /// Fixed mixing for three-state systems:
    ///   R = σ( 1.6 x̃₁ − 0.6 x̃₂ + 0.4 x̃₃ + 0.2)
    ///   G = σ(−0.5 x̃₁ + 1.2 x̃₂ + 0.7 x̃₃ − 0.1)
    ///   B = σ( 0.6 x̃₁ + 0.5 x̃₂ − 1.4 x̃₃ + 0.1)
    static ColorMap standard();

    /// Colour in [0, 1]³ for an already standardized state.
    std::array<double, 3> operator()(std::span<const double> standardized) const;
};

/// Renders one uniformly coloured frame per sample (the colour comes from the
/// colour map), adds i.i.d. uniform noise of amplitude `noise` (fraction of
/// full scale) to each pixel channel, clamps and rounds to 8 bits.
FrameSequence render_synthetic_frames(const Trajectory& traj, std::size_t width, std::size_t height,
                                      const ColorMap& color_map, double noise, std::uint64_t seed);

/// CSV with header `t,y1,...,yp`.
void write_csv_series(const std::filesystem::path& path, const OutputSeries& series);
OutputSeries read_csv_series(const std::filesystem::path& path);

}  // namespace kkl
