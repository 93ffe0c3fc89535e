#include "kkl/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kkl/error.hpp"
#include "kkl/io.hpp"
#include "kkl/random.hpp"

namespace kkl {

void OregonatorParams::validate() const {
    if (!(epsilon > 0.0 && delta > 0.0 && f > 0.0 && q > 0.0))
        throw ValidationError("Oregonator parameters must be strictly positive");
}

std::array<double, 3> oregonator_rhs(std::span<const double> x, const OregonatorParams& p) {
    const double x1 = x[0];
    const double x2 = x[1];
    const double x3 = x[2];
    return {
        (p.q * x2 - x1 * x2 + x1 * (1.0 - x1)) / p.epsilon,
        (-p.q * x2 - x1 * x2 + p.f * x3) / p.delta,
        x1 - x3,
    };
}

std::array<double, 3> oregonator_equilibrium(const OregonatorParams& p) {
    // x₃ = x₁, x₂ = f x₁/(q + x₁), and x₁ solves x² + (f + q − 1)x − q(1 + f) = 0.
    const double b = p.f + p.q - 1.0;
    const double c = -p.q * (1.0 + p.f);
    const double disc = std::sqrt(b * b - 4.0 * c);
    // Cancellation-free positive root.
    const double x1 = b >= 0.0 ? (2.0 * c) / (-b - disc) : (-b + disc) / 2.0;
    return {x1, p.f * x1 / (p.q + x1), x1};
}

VectorField oregonator_field(const OregonatorParams& params) {
    params.validate();
    return [params](std::span<const double> x, std::span<double> dxdt) {
        const auto d = oregonator_rhs(x, params);
        std::copy(d.begin(), d.end(), dxdt.begin());
    };
}

void IntegratorConfig::validate() const {
    if (!(rtol > 0.0 && atol > 0.0)) throw ValidationError("integrator tolerances must be positive");
    if (!(h_min > 0.0 && h_min <= h_init && h_init <= h_max))
        throw ValidationError("integrator step bounds must satisfy 0 < h_min <= h_init <= h_max");
    if (max_steps == 0) throw ValidationError("integrator max_steps must be positive");
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

// PI controller constants (Hairer & Wanner's DOPRI5 defaults).
constexpr double kBeta = 0.04;
constexpr double kExpo = 0.2 - kBeta * 0.75;
constexpr double kSafety = 0.9;
constexpr double kMaxShrink = 0.2;  // h_new >= 0.2 h
constexpr double kMaxGrow = 10.0;

}  // namespace

Trajectory integrate(const VectorField& rhs, std::span<const double> x0, double t_start, double t_end,
                     const IntegratorConfig& config, IntegrationStats* stats) {
    config.validate();
    if (!(t_end > t_start) || !std::isfinite(t_start) || !std::isfinite(t_end))
        throw ValidationError("integrate: time span must be finite with t_end > t_start");
    const std::size_t n = x0.size();
    if (n == 0) throw ValidationError("integrate: empty initial state");
    for (double v : x0)
        if (!std::isfinite(v)) throw ValidationError("integrate: non-finite initial state");

    Vector x(x0.begin(), x0.end()), xn(n), tmp(n), err(n);
    Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    Vector times{t_start};
    std::vector<double> flat(x.begin(), x.end());
    IntegrationStats local;

    double t = t_start;
    double h = std::min(config.h_init, t_end - t_start);
    double fac_old = 1e-4;
    bool last_rejected = false;
    rhs(x, k1);
    ++local.evaluations;

    auto stage = [&](std::initializer_list<std::pair<double, const Vector*>> terms, Vector& out_k, double hh) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = x[i];
            for (const auto& [coef, k] : terms) s += hh * coef * (*k)[i];
            tmp[i] = s;
        }
        rhs(tmp, out_k);
        ++local.evaluations;
    };

    std::size_t steps = 0;
    while (t < t_end) {
        if (++steps > config.max_steps) {
            std::ostringstream msg;
            msg << "integrate: exceeded max_steps=" << config.max_steps << " at t=" << t;
            throw IntegrationError(msg.str(), t);
        }
        bool final_step = false;
        if (t + h >= t_end || t + 1.01 * h >= t_end) {
            h = t_end - t;
            final_step = true;
        }

        stage({{a21, &k1}}, k2, h);
        stage({{a31, &k1}, {a32, &k2}}, k3, h);
        stage({{a41, &k1}, {a42, &k2}, {a43, &k3}}, k4, h);
        stage({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}, k5, h);
        stage({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}, k6, h);
        for (std::size_t i = 0; i < n; ++i)
            xn[i] = x[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
        rhs(xn, k7);
        ++local.evaluations;

        double e2 = 0.0;
        bool finite = true;
        for (std::size_t i = 0; i < n; ++i) {
            const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sc = config.atol + config.rtol * std::max(std::abs(x[i]), std::abs(xn[i]));
            const double r = ei / sc;
            e2 += r * r;
            finite = finite && std::isfinite(xn[i]);
        }
        double error = finite ? std::sqrt(e2 / static_cast<double>(n)) : std::numeric_limits<double>::infinity();
        if (!std::isfinite(error)) error = 1e10;

        const double fac11 = std::pow(error, kExpo);
        if (error <= 1.0) {
            double fac = fac11 / std::pow(fac_old, kBeta);
            fac = std::clamp(fac / kSafety, 1.0 / kMaxGrow, 1.0 / kMaxShrink);
            double h_new = std::min(h / fac, config.h_max);
            if (last_rejected) h_new = std::min(h_new, h);
            fac_old = std::max(error, 1e-4);
            t = final_step ? t_end : t + h;
            x.swap(xn);
            k1.swap(k7);
            times.push_back(t);
            flat.insert(flat.end(), x.begin(), x.end());
            ++local.accepted;
            last_rejected = false;
            h = h_new;
        } else {
            h = h / std::min(1.0 / kMaxShrink, fac11 / kSafety);
            last_rejected = true;
            ++local.rejected;
        }
        if (t < t_end && h < config.h_min) {
            std::ostringstream msg;
            msg << "integrate: step size " << h << " fell below h_min=" << config.h_min << " at t=" << t;
            throw IntegrationError(msg.str(), t);
        }
    }
    if (stats) *stats = local;
    const std::size_t rows = times.size();
    return Trajectory(std::move(times), Matrix(rows, n, std::move(flat)));
}

Trajectory sample_uniform(const Trajectory& traj, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("sample_uniform: dt must be positive");
    if (traj.size() < 2) throw ValidationError("sample_uniform: trajectory needs at least two samples");
    const double span = traj.end() - traj.start();
    if (dt > span) throw ValidationError("sample_uniform: dt exceeds the trajectory span");
    const auto count = static_cast<std::size_t>(std::floor(span / dt * (1.0 + 1e-12))) + 1;
    const std::size_t n = traj.dimension();
    const auto& ts = traj.times();
    const auto& xs = traj.states();

    Vector times(count);
    Matrix states(count, n);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const double t = std::min(traj.start() + static_cast<double>(k) * dt, traj.end());
        times[k] = t;
        while (seg + 2 < ts.size() && ts[seg + 1] < t) ++seg;
        const double w = (t - ts[seg]) / (ts[seg + 1] - ts[seg]);
        auto a = xs.row(seg);
        auto b = xs.row(seg + 1);
        auto out = states.row(k);
        for (std::size_t i = 0; i < n; ++i) out[i] = w == 1.0 ? b[i] : a[i] + w * (b[i] - a[i]);
    }
    return Trajectory(std::move(times), std::move(states));
}

OutputMap OutputMap::pass_through(std::size_t state_dim) {
    if (state_dim == 0) throw ValidationError("output map: state dimension must be positive");
    OutputMap m;
    m.kind_ = Kind::PassThrough;
    m.state_dim_ = state_dim;
    m.output_dim_ = state_dim;
    return m;
}

OutputMap OutputMap::linear(Matrix weights) {
    if (weights.rows() == 0 || weights.cols() == 0) throw ValidationError("output map: empty weight matrix");
    OutputMap m;
    m.kind_ = Kind::Linear;
    m.state_dim_ = weights.cols();
    m.output_dim_ = weights.rows();
    m.weights_ = std::move(weights);
    m.offsets_.assign(m.output_dim_, 0.0);
    return m;
}

OutputMap OutputMap::random_smooth(const Trajectory& reference, std::size_t outputs, std::uint64_t seed) {
    if (outputs == 0) throw ValidationError("output map: output dimension must be >= 1");
    if (reference.size() < 2) throw ValidationError("output map: reference trajectory needs >= 2 samples");
    const std::size_t n = reference.dimension();
    const auto& xs = reference.states();
    const auto rows = static_cast<double>(xs.rows());
    Vector mean(n, 0.0), sd(n, 0.0);
    for (std::size_t k = 0; k < xs.rows(); ++k)
        for (std::size_t j = 0; j < n; ++j) mean[j] += xs(k, j);
    for (double& m : mean) m /= rows;
    for (std::size_t k = 0; k < xs.rows(); ++k)
        for (std::size_t j = 0; j < n; ++j) sd[j] += (xs(k, j) - mean[j]) * (xs(k, j) - mean[j]);
    for (double& s : sd) {
        s = std::sqrt(s / (rows - 1.0));
        if (!(s > 0.0)) s = 1.0;
    }

    Rng rng(seed);
    OutputMap m;
    m.kind_ = Kind::RandomSmooth;
    m.state_dim_ = n;
    m.output_dim_ = outputs;
    m.seed_ = seed;
    m.weights_ = Matrix(outputs, n);
    m.offsets_.assign(outputs, 0.0);
    for (std::size_t i = 0; i < outputs; ++i)
        for (std::size_t j = 0; j < n; ++j) m.weights_(i, j) = rng.uniform(-2.0, 2.0);
    for (std::size_t i = 0; i < outputs; ++i) m.offsets_[i] = rng.uniform(-1.0, 1.0);
    // w·(x − μ)/σ + c  =  (w/σ)·x + (c − Σ w_j μ_j/σ_j)
    for (std::size_t i = 0; i < outputs; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            m.weights_(i, j) /= sd[j];
            m.offsets_[i] -= m.weights_(i, j) * mean[j];
        }
    }
    return m;
}

Vector OutputMap::evaluate(std::span<const double> x) const {
    if (x.size() != state_dim_)
        throw ValidationError("output map expects state dimension " + std::to_string(state_dim_) + ", got " +
                              std::to_string(x.size()));
    switch (kind_) {
        case Kind::PassThrough:
            return Vector(x.begin(), x.end());
        case Kind::Linear:
            return weights_ * x;
        case Kind::RandomSmooth: {
            Vector y(output_dim_);
            for (std::size_t i = 0; i < output_dim_; ++i) y[i] = std::tanh(dot(weights_.row(i), x) + offsets_[i]);
            return y;
        }
    }
    return {};
}

std::string to_string(OutputMap::Kind kind) {
    switch (kind) {
        case OutputMap::Kind::PassThrough: return "pass-through";
        case OutputMap::Kind::Linear: return "linear";
        case OutputMap::Kind::RandomSmooth: return "random-smooth";
    }
    return "unknown";
}

OutputSeries apply_output_map(const Trajectory& traj, const OutputMap& map) {
    if (traj.dimension() != map.state_dim())
        throw ValidationError("apply_output_map: trajectory has dimension " + std::to_string(traj.dimension()) +
                              " but the map expects " + std::to_string(map.state_dim()));
    Matrix y(traj.size(), map.output_dim());
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const Vector yk = map.evaluate(traj.states().row(k));
        std::copy(yk.begin(), yk.end(), y.row(k).begin());
    }
    return OutputSeries(traj.times(), std::move(y));
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
    io::write_table(path, traj.times(), traj.states(), "x");
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
    auto table = io::read_table(path, "x");
    return Trajectory(std::move(table.times), std::move(table.values));
}

}  // namespace kkl
