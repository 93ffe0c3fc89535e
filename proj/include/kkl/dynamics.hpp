#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>

#include "kkl/matrix.hpp"
#include "kkl/series.hpp"

namespace kkl {

/// Dimensionless Oregonator constants.
struct OregonatorParams {
    double epsilon = 3.6e-2;
    double delta = 1.2e-4;
    double f = 1.0;
    double q = 2.4e-4;

    void validate() const;
};

/// Right-hand side of the three-variable Oregonator:
///   ε ẋ₁ = q x₂ − x₁x₂ + x₁(1 − x₁)
///   δ ẋ₂ = −q x₂ − x₁x₂ + f x₃
///     ẋ₃ = x₁ − x₃
std::array<double, 3> oregonator_rhs(std::span<const double> x, const OregonatorParams& params);

/// The positive steady state.
std::array<double, 3> oregonator_equilibrium(const OregonatorParams& params);

/// Autonomous vector field: writes ẋ into `dxdt`.
using VectorField = std::function<void(std::span<const double> x, std::span<double> dxdt)>;

VectorField oregonator_field(const OregonatorParams& params);

struct IntegratorConfig {
    double rtol = 1e-6;
    double atol = 1e-9;
    double h_init = 1e-4;
    double h_max = 0.05;
    double h_min = 1e-9;
    std::size_t max_steps = 20'000'000;

    void validate() const;
};

struct IntegrationStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t evaluations = 0;
};

/// Dormand-Prince 5(4) with PI step-size control. Every accepted step is
/// recorded; the last step lands exactly on `t_end`.
///
/// Throws IntegrationError if the step size drops below h_min or max_steps
/// is exhausted.
Trajectory integrate(const VectorField& rhs, std::span<const double> x0, double t_start, double t_end,
                     const IntegratorConfig& config = {}, IntegrationStats* stats = nullptr);

/// Resample onto t_start + k·dt by linear interpolation between stored states.
Trajectory sample_uniform(const Trajectory& traj, double dt);

/// Static output map y = H(x).
class OutputMap {
public:
    enum class Kind { PassThrough, Linear, RandomSmooth };

    static OutputMap pass_through(std::size_t state_dim);
    static OutputMap linear(Matrix weights);
    /// y_i = tanh(w_iᵀ x + c_i) with w_i uniform on [-2, 2]ⁿ applied to states
    /// standardized by `reference`, and c_i uniform on [-1, 1]. The
    /// standardization is folded into the stored weights and offsets.
    static OutputMap random_smooth(const Trajectory& reference, std::size_t outputs, std::uint64_t seed);

    Kind kind() const noexcept { return kind_; }
    std::size_t state_dim() const noexcept { return state_dim_; }
    std::size_t output_dim() const noexcept { return output_dim_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const Matrix& weights() const noexcept { return weights_; }
    const Vector& offsets() const noexcept { return offsets_; }

    Vector evaluate(std::span<const double> x) const;

private:
    Kind kind_ = Kind::PassThrough;
    std::size_t state_dim_ = 0;
    std::size_t output_dim_ = 0;
    std::uint64_t seed_ = 0;
    Matrix weights_;
    Vector offsets_;
};

std::string to_string(OutputMap::Kind kind);

/// Evaluates the map on every sample. The trajectory must be uniformly sampled.
OutputSeries apply_output_map(const Trajectory& traj, const OutputMap& map);

/// CSV with header `t,x1,...,xn`.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

}  // namespace kkl
