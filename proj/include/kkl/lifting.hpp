#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>

#include <json.hpp>

#include "kkl/dynamics.hpp"
#include "kkl/matrix.hpp"
#include "kkl/series.hpp"

namespace kkl {

/// Assigned observer dynamics ż = Az + By with A = −diag(rates).
struct ObserverConfig {
    std::size_t state_dim = 0;   // n
    std::size_t output_dim = 0;  // p
    Vector rates;                // ascending, all within [rate_min, rate_max]
    Matrix input;                // B, order × p
    std::uint64_t seed = 0;
    double rate_min = 1.0;
    double rate_max = 50.0;

    std::size_t order() const noexcept { return rates.size(); }
    double slowest_rate() const { return rates.front(); }
    void validate() const;
};

/// Draws an observer of order p(n+1) (or `order` when given): rates uniform on
/// [rate_min, rate_max], sorted ascending and nudged apart to be distinct,
/// then B uniform on [-1, 1] row by row. Same seed, same bytes.
ObserverConfig make_observer(std::size_t state_dim, std::size_t output_dim, double rate_min, double rate_max,
                             std::uint64_t seed, std::optional<std::size_t> order = std::nullopt);

/// Hex SHA-256 of B's raw doubles.
std::string input_matrix_hash(const ObserverConfig& config);

nlohmann::json observer_to_json(const ObserverConfig& config);
/// Regenerates the observer from the recorded seed and checks rates and the
/// B hash against the document.
ObserverConfig observer_from_json(const nlohmann::json& doc);

/// Observer states z[k] on the output grid.
struct LiftedSeries {
    Vector times;
    Matrix states;  // N × order
    std::shared_ptr<const ObserverConfig> config;
};

/// Exact zero-order-hold propagation, channel by channel:
///   z_i[k+1] = e^{−a_i h} z_i[k] + (1 − e^{−a_i h})/a_i · (B y[k])_i
/// with z[0] = z0 (zero when empty).
LiftedSeries lift(const OutputSeries& y, std::shared_ptr<const ObserverConfig> config,
                  std::span<const double> z0 = {});

void write_lifted_csv(const std::filesystem::path& path, const LiftedSeries& lifted);

struct SylvesterSolution {
    Matrix transform;  // T, order × n
    double residual = 0.0;  // max |TF − AT − BH|
};

/// Solves TF − AT = BH through (Fᵀ ⊗ I − I ⊗ A) vec(T) = vec(BH).
SylvesterSolution solve_sylvester(const Matrix& f, const Matrix& h, const Matrix& a, const Matrix& b);

/// ‖z[k] − T x[k]‖₂ for every sample.
Vector observation_errors(const Trajectory& x_traj, const LiftedSeries& lifted, const SylvesterSolution& t);

struct ConvergenceFit {
    double slope = 0.0;      // d/dt log‖z − Tx‖
    double intercept = 0.0;
    std::size_t samples_used = 0;
    double floor = 0.0;
};

/// Least-squares slope of log‖z[k] − T x[k]‖ against time over the leading
/// window where the error stays above the numerical floor. The floor is ten
/// times the largest error over the final tenth of the record (the settled
/// discretization level), and at least 1e-12 of the signal scale.
/// Throws DegenerateDataError when fewer than three samples clear the floor.
ConvergenceFit verify_linear_convergence(const Trajectory& x_traj, const LiftedSeries& lifted,
                                         const SylvesterSolution& t);

}  // namespace kkl
