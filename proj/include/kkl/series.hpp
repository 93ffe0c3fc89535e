#pragma once

#include <cstddef>
#include <optional>

#include "kkl/matrix.hpp"

namespace kkl {

/// True when `times` is an arithmetic progression (relative tolerance `rtol`
/// on each instant). Fewer than two instants count as uniform.
bool is_uniform_grid(std::span<const double> times, double rtol = 1e-9) noexcept;

/// Time-stamped sequence of state vectors x(t_k); row k of `states` is x(t_k).
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(Vector times, Matrix states);

    const Vector& times() const noexcept { return times_; }
    const Matrix& states() const noexcept { return states_; }
    std::size_t size() const noexcept { return times_.size(); }
    std::size_t dimension() const noexcept { return states_.cols(); }
    double start() const { return times_.front(); }
    double end() const { return times_.back(); }
    bool is_uniform() const noexcept { return is_uniform_grid(times_); }
    /// Sampling interval; throws unless the grid is uniform with >= 2 samples.
    double interval() const;
    /// First `count` samples.
    Trajectory truncated(std::size_t count) const;

private:
    Vector times_;
    Matrix states_;
};

/// Pixel block geometry carried by series extracted from video frames.
/// Vector layout is channel-planar: all R values (row-major over the block),
/// then all G, then all B.
struct PlanarLayout {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t pixels() const noexcept { return width * height; }
    friend bool operator==(const PlanarLayout&, const PlanarLayout&) = default;
};

/// Uniformly sampled measurements y[k]; row k of `values` is y(t_k).
class OutputSeries {
public:
    OutputSeries() = default;
    OutputSeries(Vector times, Matrix values, std::optional<PlanarLayout> layout = std::nullopt);

    const Vector& times() const noexcept { return times_; }
    const Matrix& values() const noexcept { return values_; }
    const std::optional<PlanarLayout>& layout() const noexcept { return layout_; }
    std::size_t size() const noexcept { return times_.size(); }
    std::size_t dimension() const noexcept { return values_.cols(); }
    double interval() const;

private:
    Vector times_;
    Matrix values_;
    std::optional<PlanarLayout> layout_;
};

}  // namespace kkl
