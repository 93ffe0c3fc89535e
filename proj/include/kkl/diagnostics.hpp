#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "kkl/matrix.hpp"
#include "kkl/reduction.hpp"
#include "kkl/series.hpp"

namespace kkl {

/// Least-squares affine map truth ≈ W·π + c, with fit quality per truth dimension.
struct AffineAlignment {
    Matrix weights;  // truth_dim × component_dim
    Vector offset;   // truth_dim
    Vector r2;
    Vector rmse;
    Vector nrmse;    // rmse / (max − min) of the truth dimension
    std::size_t samples = 0;

    Vector apply(std::span<const double> components) const;
    double mean_nrmse() const;

    friend bool operator==(const AffineAlignment&, const AffineAlignment&) = default;
};

/// Regresses every truth column on [π, 1] through the normal equations.
/// Throws DegenerateDataError when a component column is constant or the
/// regressors are collinear.
AffineAlignment align_affine(const Matrix& components, const Matrix& truth);

/// Same, after checking that both series share a time grid; only rows from
/// `first_row` on enter the fit.
AffineAlignment align_affine(const ComponentSeries& components, const Trajectory& truth, std::size_t first_row = 0);

/// Recomputes R², RMSE and normalized RMSE of a fitted map on other samples.
AffineAlignment evaluate_alignment(const AffineAlignment& fit, const Matrix& components, const Matrix& truth);

struct PeriodEstimate {
    double period = 0.0;
    double peak = 0.0;  // autocorrelation at the selected lag
    bool valid = false;

    friend bool operator==(const PeriodEstimate&, const PeriodEstimate&) = default;
};

inline constexpr double kPeriodPeakThreshold = 0.2;

/// Period from the autocorrelation of the mean-removed series, sampled every
/// `dt`. Each lag uses the Pearson correlation of the overlapping segments.
/// The highest interior peak in [min_lag, max_lag] wins; peaks within 0.01
/// of it count as ties and the shortest lag is taken, so a clean periodic
/// signal reports its fundamental rather than a multiple. The lag is refined
/// by a parabola through the peak and its neighbours. Default lag range:
/// [0.1, 0.5] of the series span.
PeriodEstimate estimate_period(std::span<const double> values, double dt, std::optional<double> min_lag = {},
                               std::optional<double> max_lag = {});

/// max over t in [t_from, t_end − T] of ‖s(t+T) − s(t)‖₂ / ‖range‖₂, where
/// range is the componentwise max − min over [t_from, t_end] and s(t+T) is
/// linearly interpolated. Requires a uniform grid and ≥ 2 periods of data
/// after `t_from`.
double recurrence_error(std::span<const double> times, const Matrix& states, double period, double t_from);
double recurrence_error(const Trajectory& traj, double period, double t_from);
double recurrence_error(const ComponentSeries& series, double period, double t_from);

/// Aggregated run diagnostics. Absent optionals are omitted from the JSON.
struct Report {
    static constexpr const char* kSchemaVersion = "1.0";

    std::string schema_version = kSchemaVersion;
    std::optional<std::size_t> target_dim;
    std::optional<double> explained_ratio;
    std::optional<Vector> eigenvalues;
    std::optional<Vector> spectrum_head;  // leading eigenvalues (up to 10)
    std::optional<double> trim_time;
    std::optional<std::size_t> fit_samples;
    std::optional<AffineAlignment> alignment;
    std::optional<PeriodEstimate> truth_period;
    std::optional<PeriodEstimate> recovered_period;
    std::optional<double> period_relative_error;
    std::optional<double> convergence_rate;
    std::optional<double> success_threshold;
    std::optional<bool> recovery_success;
    std::map<std::string, std::uint64_t> seeds;
    std::map<std::string, std::string> hashes;

    friend bool operator==(const Report&, const Report&) = default;
};

/// Collects PCA, alignment and period diagnostics into a Report. Recovery
/// counts as successful when every dimension's normalized RMSE is at most
/// `success_threshold`.
Report report(const PcaModel& model, const std::optional<AffineAlignment>& alignment,
              const std::optional<PeriodEstimate>& truth_period,
              const std::optional<PeriodEstimate>& recovered_period, double success_threshold = 0.15);

nlohmann::json report_to_json(const Report& r);
Report report_from_json(const nlohmann::json& doc);

}  // namespace kkl
