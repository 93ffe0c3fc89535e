#include "kkl/series.hpp"

#include <cmath>
#include <string>

#include "kkl/error.hpp"

namespace kkl {

bool is_uniform_grid(std::span<const double> times, double rtol) noexcept {
    const std::size_t n = times.size();
    if (n < 3) return true;
    const double h = (times[n - 1] - times[0]) / static_cast<double>(n - 1);
    if (!(h > 0.0)) return false;
    const double scale = std::max(std::abs(times[0]), std::abs(times[n - 1]));
    const double tol = rtol * std::max(scale, h);
    for (std::size_t k = 1; k < n; ++k) {
        const double expected = times[0] + static_cast<double>(k) * h;
        if (std::abs(times[k] - expected) > tol) return false;
    }
    return true;
}

Trajectory::Trajectory(Vector times, Matrix states) : times_(std::move(times)), states_(std::move(states)) {
    if (times_.size() != states_.rows())
        throw ValidationError("trajectory: " + std::to_string(times_.size()) + " times but " +
                              std::to_string(states_.rows()) + " states");
    for (std::size_t k = 1; k < times_.size(); ++k)
        if (!(times_[k] > times_[k - 1]))
            throw ValidationError("trajectory: times are not strictly increasing at index " + std::to_string(k));
    for (double t : times_)
        if (!std::isfinite(t)) throw ValidationError("trajectory: non-finite time");
    if (!states_.all_finite()) throw ValidationError("trajectory: non-finite state");
}

double Trajectory::interval() const {
    if (times_.size() < 2 || !is_uniform()) throw ValidationError("trajectory is not uniformly sampled");
    return (times_.back() - times_.front()) / static_cast<double>(times_.size() - 1);
}

Trajectory Trajectory::truncated(std::size_t count) const {
    if (count > size()) throw ValidationError("trajectory truncation beyond its length");
    return Trajectory(Vector(times_.begin(), times_.begin() + static_cast<std::ptrdiff_t>(count)),
                      states_.row_slice(0, count));
}

OutputSeries::OutputSeries(Vector times, Matrix values, std::optional<PlanarLayout> layout)
    : times_(std::move(times)), values_(std::move(values)), layout_(layout) {
    if (times_.size() != values_.rows())
        throw ValidationError("output series: " + std::to_string(times_.size()) + " times but " +
                              std::to_string(values_.rows()) + " rows");
    for (std::size_t k = 1; k < times_.size(); ++k)
        if (!(times_[k] > times_[k - 1]))
            throw ValidationError("output series: times are not strictly increasing at index " +
                                  std::to_string(k));
    if (!is_uniform_grid(times_)) throw ValidationError("output series: timestamps are not uniform");
    if (!values_.all_finite()) throw ValidationError("output series: non-finite value");
    if (layout_ && 3 * layout_->pixels() != values_.cols())
        throw ValidationError("output series: planar layout does not match output dimension");
}

double OutputSeries::interval() const {
    if (times_.size() < 2) throw ValidationError("output series needs at least two samples for an interval");
    return (times_.back() - times_.front()) / static_cast<double>(times_.size() - 1);
}

}  // namespace kkl
