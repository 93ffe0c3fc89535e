#include "kkl/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kkl/error.hpp"
#include "kkl/linalg.hpp"

namespace kkl {

Vector AffineAlignment::apply(std::span<const double> components) const {
    Vector out = weights * components;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += offset[i];
    return out;
}

double AffineAlignment::mean_nrmse() const {
    if (nrmse.empty()) return 0.0;
    double s = 0.0;
    for (double v : nrmse) s += v;
    return s / static_cast<double>(nrmse.size());
}

AffineAlignment evaluate_alignment(const AffineAlignment& fit, const Matrix& components, const Matrix& truth) {
    if (components.rows() != truth.rows()) throw ValidationError("alignment: sample counts differ");
    if (components.cols() != fit.weights.cols() || truth.cols() != fit.weights.rows())
        throw ValidationError("alignment: dimensions do not match the fitted map");
    const std::size_t n = truth.rows();
    const std::size_t m = truth.cols();
    if (n == 0) throw ValidationError("alignment: no samples");
    AffineAlignment out = fit;
    out.samples = n;
    out.r2.assign(m, 0.0);
    out.rmse.assign(m, 0.0);
    out.nrmse.assign(m, 0.0);
    Vector mean(m, 0.0), lo(m, std::numeric_limits<double>::infinity()), hi(m, -std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < m; ++j) {
            mean[j] += truth(k, j);
            lo[j] = std::min(lo[j], truth(k, j));
            hi[j] = std::max(hi[j], truth(k, j));
        }
    for (double& v : mean) v /= static_cast<double>(n);
    Vector ss_res(m, 0.0), ss_tot(m, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const Vector pred = fit.apply(components.row(k));
        for (std::size_t j = 0; j < m; ++j) {
            const double r = truth(k, j) - pred[j];
            const double c = truth(k, j) - mean[j];
            ss_res[j] += r * r;
            ss_tot[j] += c * c;
        }
    }
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
        out.rmse[j] = std::sqrt(ss_res[j] / static_cast<double>(n));
        out.r2[j] = ss_tot[j] > 0.0 ? 1.0 - ss_res[j] / ss_tot[j] : (ss_res[j] == 0.0 ? 1.0 : -inf);
        const double range = hi[j] - lo[j];
        out.nrmse[j] = range > 0.0 ? out.rmse[j] / range : (out.rmse[j] == 0.0 ? 0.0 : inf);
    }
    return out;
}

AffineAlignment align_affine(const Matrix& components, const Matrix& truth) {
    if (components.rows() != truth.rows())
        throw ValidationError("align_affine: " + std::to_string(components.rows()) + " component samples vs " +
                              std::to_string(truth.rows()) + " truth samples");
    const std::size_t n = components.rows();
    const std::size_t d = components.cols();
    const std::size_t m = truth.cols();
    if (d == 0 || m == 0) throw ValidationError("align_affine: empty dimension");
    if (n < d + 2) throw ValidationError("align_affine: too few samples for the regression");

    // Standardize the regressors so the normal equations are a correlation system.
    Vector mu(d, 0.0), sd(d, 0.0);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < d; ++i) mu[i] += components(k, i);
    for (double& v : mu) v /= static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < d; ++i) sd[i] += (components(k, i) - mu[i]) * (components(k, i) - mu[i]);
    for (std::size_t i = 0; i < d; ++i) {
        sd[i] = std::sqrt(sd[i] / static_cast<double>(n));
        if (!(sd[i] > 1e-14 * std::max(1.0, std::abs(mu[i]))))
            throw DegenerateDataError("align_affine: component " + std::to_string(i + 1) + " is constant");
    }
    Matrix x(n, d);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < d; ++i) x(k, i) = (components(k, i) - mu[i]) / sd[i];
    const Matrix gram = gram_cols(x);
    Vector truth_mean(m, 0.0);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < m; ++j) truth_mean[j] += truth(k, j);
    for (double& v : truth_mean) v /= static_cast<double>(n);

    AffineAlignment fit;
    fit.weights = Matrix(m, d);
    fit.offset.assign(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        Vector rhs(d, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const double t = truth(k, j) - truth_mean[j];
            for (std::size_t i = 0; i < d; ++i) rhs[i] += x(k, i) * t;
        }
        Vector beta;
        try {
            beta = solve_linear(gram, rhs, 1e12);
        } catch (const SingularMatrixError& e) {
            throw DegenerateDataError(std::string("align_affine: components are collinear; ") + e.what());
        }
        double c = truth_mean[j];
        for (std::size_t i = 0; i < d; ++i) {
            fit.weights(j, i) = beta[i] / sd[i];
            c -= fit.weights(j, i) * mu[i];
        }
        fit.offset[j] = c;
    }
    return evaluate_alignment(fit, components, truth);
}

AffineAlignment align_affine(const ComponentSeries& components, const Trajectory& truth, std::size_t first_row) {
    const std::size_t n = components.times.size();
    if (truth.size() != n)
        throw ValidationError("align_affine: component series has " + std::to_string(n) + " samples, truth has " +
                              std::to_string(truth.size()) + "; resample first");
    const double scale = std::max(1.0, std::abs(components.times.empty() ? 0.0 : components.times.back()));
    for (std::size_t k = 0; k < n; ++k)
        if (std::abs(components.times[k] - truth.times()[k]) > 1e-9 * scale)
            throw ValidationError("align_affine: time grids differ at sample " + std::to_string(k));
    if (first_row >= n) throw ValidationError("align_affine: window starts past the end of the series");
    return align_affine(components.components.row_slice(first_row, n), truth.states().row_slice(first_row, n));
}

PeriodEstimate estimate_period(std::span<const double> values, double dt, std::optional<double> min_lag,
                               std::optional<double> max_lag) {
    if (!(dt > 0.0)) throw ValidationError("estimate_period: dt must be positive");
    const std::size_t n = values.size();
    if (n < 8) throw ValidationError("estimate_period: series too short");
    const double span = static_cast<double>(n - 1) * dt;
    const double lo_t = min_lag.value_or(0.1 * span);
    const double hi_t = max_lag.value_or(0.5 * span);
    const auto k_lo = static_cast<std::size_t>(std::max(1.0, std::ceil(lo_t / dt - 1e-9)));
    const auto k_hi = std::min(static_cast<std::size_t>(std::floor(hi_t / dt + 1e-9)), n - 3);
    if (k_hi < k_lo + 2) throw ValidationError("estimate_period: fewer than three candidate lags in range");

    // Pearson correlation of x[0..n−k) against x[k..n) for lags k_lo−1 .. k_hi+1.
    const std::size_t first = k_lo - 1;
    const std::size_t last = k_hi + 1;
    Vector r(last - first + 1, 0.0);
    for (std::size_t k = std::max<std::size_t>(first, 1); k <= last; ++k) {
        const std::size_t m = n - k;
        double ma = 0.0, mb = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            ma += values[i];
            mb += values[i + k];
        }
        ma /= static_cast<double>(m);
        mb /= static_cast<double>(m);
        double sab = 0.0, saa = 0.0, sbb = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double a = values[i] - ma;
            const double b = values[i + k] - mb;
            sab += a * b;
            saa += a * a;
            sbb += b * b;
        }
        const double denom = std::sqrt(saa * sbb);
        r[k - first] = denom > 0.0 ? std::clamp(sab / denom, -1.0, 1.0) : 0.0;
    }
    if (first == 0) r[0] = 1.0;

    std::vector<std::size_t> peaks;
    double best = -2.0;
    for (std::size_t k = k_lo; k <= k_hi; ++k) {
        const double c = r[k - first];
        if (c > r[k - 1 - first] && c >= r[k + 1 - first]) {
            peaks.push_back(k);
            best = std::max(best, c);
        }
    }
    PeriodEstimate est;
    if (peaks.empty()) return est;
    std::size_t chosen = 0;
    for (std::size_t k : peaks)
        if (r[k - first] >= best - 0.01) {
            chosen = k;
            break;
        }
    const double ym = r[chosen - 1 - first];
    const double y0 = r[chosen - first];
    const double yp = r[chosen + 1 - first];
    const double curvature = ym - 2.0 * y0 + yp;
    double offset = curvature < 0.0 ? 0.5 * (ym - yp) / curvature : 0.0;
    offset = std::clamp(offset, -0.5, 0.5);
    est.period = (static_cast<double>(chosen) + offset) * dt;
    est.peak = y0;
    est.valid = y0 > kPeriodPeakThreshold && est.period > 0.0;
    return est;
}

double recurrence_error(std::span<const double> times, const Matrix& states, double period, double t_from) {
    if (times.size() != states.rows()) throw ValidationError("recurrence_error: times and states differ in length");
    if (!(period > 0.0)) throw ValidationError("recurrence_error: period must be positive");
    if (times.size() < 3 || !is_uniform_grid(times)) throw ValidationError("recurrence_error: grid must be uniform");
    const std::size_t n = times.size();
    const double dt = (times[n - 1] - times[0]) / static_cast<double>(n - 1);
    if (times[n - 1] - t_from < 2.0 * period)
        throw ValidationError("recurrence_error: need at least two periods after the transient");

    std::size_t start = 0;
    while (start < n && times[start] < t_from - 1e-12 * std::max(1.0, std::abs(t_from))) ++start;
    const std::size_t d = states.cols();
    Vector lo(d, std::numeric_limits<double>::infinity()), hi(d, -std::numeric_limits<double>::infinity());
    for (std::size_t k = start; k < n; ++k)
        for (std::size_t j = 0; j < d; ++j) {
            lo[j] = std::min(lo[j], states(k, j));
            hi[j] = std::max(hi[j], states(k, j));
        }
    Vector range(d);
    for (std::size_t j = 0; j < d; ++j) range[j] = hi[j] - lo[j];
    const double range_norm = norm2(range);
    if (!(range_norm > 0.0)) return 0.0;

    double worst = 0.0;
    Vector diff(d);
    for (std::size_t k = start; k < n; ++k) {
        const double target = times[k] + period;
        if (target > times[n - 1]) break;
        const double pos = (target - times[0]) / dt;
        auto i = static_cast<std::size_t>(std::floor(pos));
        if (i >= n - 1) i = n - 2;
        const double w = pos - static_cast<double>(i);
        for (std::size_t j = 0; j < d; ++j) {
            const double shifted = states(i, j) + w * (states(i + 1, j) - states(i, j));
            diff[j] = shifted - states(k, j);
        }
        worst = std::max(worst, norm2(diff) / range_norm);
    }
    return worst;
}

double recurrence_error(const Trajectory& traj, double period, double t_from) {
    return recurrence_error(traj.times(), traj.states(), period, t_from);
}

double recurrence_error(const ComponentSeries& series, double period, double t_from) {
    return recurrence_error(series.times, series.components, period, t_from);
}

Report report(const PcaModel& model, const std::optional<AffineAlignment>& alignment,
              const std::optional<PeriodEstimate>& truth_period,
              const std::optional<PeriodEstimate>& recovered_period, double success_threshold) {
    Report r;
    r.target_dim = model.target_dim;
    r.explained_ratio = model.explained_ratio;
    r.eigenvalues = model.eigenvalues;
    const std::size_t head = std::min<std::size_t>(model.spectrum.size(), 10);
    r.spectrum_head = Vector(model.spectrum.begin(), model.spectrum.begin() + static_cast<std::ptrdiff_t>(head));
    r.fit_samples = model.fit_samples;
    r.alignment = alignment;
    r.truth_period = truth_period;
    r.recovered_period = recovered_period;
    if (truth_period && recovered_period && truth_period->valid && recovered_period->valid)
        r.period_relative_error = std::abs(recovered_period->period - truth_period->period) / truth_period->period;
    if (alignment) {
        r.success_threshold = success_threshold;
        r.recovery_success = std::all_of(alignment->nrmse.begin(), alignment->nrmse.end(),
                                         [&](double v) { return v <= success_threshold; });
    }
    return r;
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data().begin(), m.data().end())}};
}

Matrix matrix_from(const nlohmann::json& j) {
    return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(), j.at("data").get<Vector>());
}

nlohmann::json period_json(const PeriodEstimate& p) {
    return {{"period", p.period}, {"peak", p.peak}, {"valid", p.valid}};
}

PeriodEstimate period_from(const nlohmann::json& j) {
    return {j.at("period").get<double>(), j.at("peak").get<double>(), j.at("valid").get<bool>()};
}

template <typename T>
void put(nlohmann::json& doc, const char* key, const std::optional<T>& v) {
    if (v) doc[key] = *v;
}

template <typename T>
void get(const nlohmann::json& doc, const char* key, std::optional<T>& v) {
    if (doc.contains(key)) v = doc.at(key).get<T>();
}

}  // namespace

nlohmann::json report_to_json(const Report& r) {
    nlohmann::json doc;
    doc["schema_version"] = r.schema_version;
    put(doc, "target_dim", r.target_dim);
    put(doc, "explained_ratio", r.explained_ratio);
    put(doc, "eigenvalues", r.eigenvalues);
    put(doc, "spectrum_head", r.spectrum_head);
    put(doc, "trim_time", r.trim_time);
    put(doc, "fit_samples", r.fit_samples);
    if (r.alignment) {
        const auto& a = *r.alignment;
        doc["alignment"] = {{"weights", matrix_json(a.weights)}, {"offset", a.offset}, {"r2", a.r2},
                            {"rmse", a.rmse},                    {"nrmse", a.nrmse},   {"samples", a.samples}};
    }
    if (r.truth_period) doc["truth_period"] = period_json(*r.truth_period);
    if (r.recovered_period) doc["recovered_period"] = period_json(*r.recovered_period);
    put(doc, "period_relative_error", r.period_relative_error);
    put(doc, "convergence_rate", r.convergence_rate);
    put(doc, "success_threshold", r.success_threshold);
    put(doc, "recovery_success", r.recovery_success);
    if (!r.seeds.empty()) doc["seeds"] = r.seeds;
    if (!r.hashes.empty()) doc["hashes"] = r.hashes;
    return doc;
}

Report report_from_json(const nlohmann::json& doc) {
    try {
        Report r;
        r.schema_version = doc.at("schema_version").get<std::string>();
        get(doc, "target_dim", r.target_dim);
        get(doc, "explained_ratio", r.explained_ratio);
        get(doc, "eigenvalues", r.eigenvalues);
        get(doc, "spectrum_head", r.spectrum_head);
        get(doc, "trim_time", r.trim_time);
        get(doc, "fit_samples", r.fit_samples);
        if (doc.contains("alignment")) {
            const auto& j = doc.at("alignment");
            AffineAlignment a;
            a.weights = matrix_from(j.at("weights"));
            a.offset = j.at("offset").get<Vector>();
            a.r2 = j.at("r2").get<Vector>();
            a.rmse = j.at("rmse").get<Vector>();
            a.nrmse = j.at("nrmse").get<Vector>();
            a.samples = j.at("samples").get<std::size_t>();
            r.alignment = std::move(a);
        }
        if (doc.contains("truth_period")) r.truth_period = period_from(doc.at("truth_period"));
        if (doc.contains("recovered_period")) r.recovered_period = period_from(doc.at("recovered_period"));
        get(doc, "period_relative_error", r.period_relative_error);
        get(doc, "convergence_rate", r.convergence_rate);
        get(doc, "success_threshold", r.success_threshold);
        get(doc, "recovery_success", r.recovery_success);
        if (doc.contains("seeds")) r.seeds = doc.at("seeds").get<std::map<std::string, std::uint64_t>>();
        if (doc.contains("hashes")) r.hashes = doc.at("hashes").get<std::map<std::string, std::string>>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("report document: ") + e.what());
    }
}

}  // namespace kkl
