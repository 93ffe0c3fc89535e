#pragma once

#include <span>
#include <string>
#include <vector>

#include "kkl/matrix.hpp"

namespace kkl::svg {

/// Default axonometric view, degrees.
inline constexpr double kAzimuthDeg = -60.0;
inline constexpr double kElevationDeg = 25.0;

struct Series2d {
    std::string label;
    Vector x;
    Vector y;
};

struct PlotOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::string z_label;
    int width = 640;
    int height = 480;
    bool markers = false;
    bool equal_aspect = false;
    bool hide_axes = false;
};

/// Line plot of one or more polylines in data coordinates. Output contains no
/// timestamps, so identical inputs produce identical bytes.
std::string line_plot(std::span<const Series2d> series, const PlotOptions& options);

/// Every selected column of `values` against time.
std::string time_plot(std::span<const double> times, const Matrix& values, std::span<const std::size_t> columns,
                      std::span<const std::string> labels, const PlotOptions& options);

/// Column `a` against column `b`.
std::string pair_plot(const Matrix& values, std::size_t a, std::size_t b, const PlotOptions& options);

/// Three columns, each rescaled to [-1, 1], rotated by `azimuth_deg` about the
/// vertical axis and tilted by `elevation_deg`, then drawn orthographically
/// with the rescaled coordinate axes.
std::string axonometric_plot(const Matrix& values, std::size_t a, std::size_t b, std::size_t c,
                             const PlotOptions& options, double azimuth_deg = kAzimuthDeg,
                             double elevation_deg = kElevationDeg);

}  // namespace kkl::svg
