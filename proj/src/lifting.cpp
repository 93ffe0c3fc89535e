#include "kkl/lifting.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kkl/error.hpp"
#include "kkl/hash.hpp"
#include "kkl/io.hpp"
#include "kkl/linalg.hpp"
#include "kkl/random.hpp"

namespace kkl {

void ObserverConfig::validate() const {
    if (state_dim == 0 || output_dim == 0) throw ValidationError("observer: dimensions must be positive");
    if (!(rate_min > 0.0 && rate_min < rate_max)) throw ValidationError("observer: need 0 < rate_min < rate_max");
    if (rates.empty()) throw ValidationError("observer: no rates");
    if (input.rows() != rates.size() || input.cols() != output_dim)
        throw ValidationError("observer: B must be order × p");
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (!(rates[i] >= rate_min && rates[i] <= rate_max))
            throw ValidationError("observer: rate " + std::to_string(i) + " outside the rate range");
        if (i > 0 && !(rates[i] > rates[i - 1])) throw ValidationError("observer: rates must be distinct and ascending");
        if (max_abs(input.row(i)) == 0.0) throw ValidationError("observer: B has a zero row");
    }
}

ObserverConfig make_observer(std::size_t state_dim, std::size_t output_dim, double rate_min, double rate_max,
                             std::uint64_t seed, std::optional<std::size_t> order) {
    if (state_dim == 0 || output_dim == 0) throw ValidationError("make_observer: n and p must be >= 1");
    if (!(rate_min > 0.0 && rate_min < rate_max) || !std::isfinite(rate_max))
        throw ValidationError("make_observer: rate range must satisfy 0 < a_min < a_max");
    const std::size_t nz = order.value_or(output_dim * (state_dim + 1));
    if (nz == 0) throw ValidationError("make_observer: observer order must be positive");

    ObserverConfig cfg;
    cfg.state_dim = state_dim;
    cfg.output_dim = output_dim;
    cfg.seed = seed;
    cfg.rate_min = rate_min;
    cfg.rate_max = rate_max;

    Rng rng(seed);
    cfg.rates.resize(nz);
    for (double& a : cfg.rates) a = rng.uniform(rate_min, rate_max);
    std::sort(cfg.rates.begin(), cfg.rates.end());
    constexpr double kMinGap = 1e-9;
    for (std::size_t i = 1; i < nz; ++i)
        if (cfg.rates[i] - cfg.rates[i - 1] < kMinGap) cfg.rates[i] = cfg.rates[i - 1] + kMinGap;
    if (cfg.rates.back() > rate_max)
        throw ValidationError("make_observer: rate range too narrow for " + std::to_string(nz) + " distinct rates");

    cfg.input = Matrix(nz, output_dim);
    for (std::size_t i = 0; i < nz; ++i) {
        auto row = cfg.input.row(i);
        do {
            for (double& b : row) b = rng.uniform(-1.0, 1.0);
        } while (max_abs(row) == 0.0);
    }
    return cfg;
}

std::string input_matrix_hash(const ObserverConfig& config) { return sha256_hex(config.input.data()); }

nlohmann::json observer_to_json(const ObserverConfig& config) {
    nlohmann::json doc;
    doc["state_dim"] = config.state_dim;
    doc["output_dim"] = config.output_dim;
    doc["order"] = config.order();
    doc["seed"] = config.seed;
    doc["rate_range"] = {config.rate_min, config.rate_max};
    doc["rates"] = config.rates;
    doc["input_matrix_sha256"] = input_matrix_hash(config);
    doc["input_matrix_distribution"] = "uniform[-1,1]";
    return doc;
}

ObserverConfig observer_from_json(const nlohmann::json& doc) {
    try {
        const auto range = doc.at("rate_range").get<std::vector<double>>();
        if (range.size() != 2) throw ValidationError("observer document: rate_range must have two entries");
        ObserverConfig cfg = make_observer(doc.at("state_dim").get<std::size_t>(), doc.at("output_dim").get<std::size_t>(),
                                           range[0], range[1], doc.at("seed").get<std::uint64_t>(),
                                           doc.at("order").get<std::size_t>());
        if (doc.contains("rates") && doc.at("rates").get<Vector>() != cfg.rates)
            throw ValidationError("observer document: rates do not match the regenerated observer");
        if (doc.contains("input_matrix_sha256") && doc.at("input_matrix_sha256").get<std::string>() != input_matrix_hash(cfg))
            throw ValidationError("observer document: B hash does not match the regenerated observer");
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("observer document: ") + e.what());
    }
}

LiftedSeries lift(const OutputSeries& y, std::shared_ptr<const ObserverConfig> config, std::span<const double> z0) {
    if (!config) throw ValidationError("lift: missing observer configuration");
    config->validate();
    const std::size_t nz = config->order();
    const std::size_t p = config->output_dim;
    if (y.dimension() != p)
        throw ValidationError("lift: output series has dimension " + std::to_string(y.dimension()) +
                              " but the observer expects " + std::to_string(p));
    if (y.size() < 2) throw ValidationError("lift: need at least two samples");
    if (!z0.empty() && z0.size() != nz) throw ValidationError("lift: z0 has the wrong length");
    const double h = y.interval();

    Vector decay(nz), gain(nz);
    for (std::size_t i = 0; i < nz; ++i) {
        const double a = config->rates[i];
        decay[i] = std::exp(-a * h);
        gain[i] = -std::expm1(-a * h) / a;
    }

    const std::size_t n_samples = y.size();
    Matrix z(n_samples, nz);
    if (!z0.empty()) std::copy(z0.begin(), z0.end(), z.row(0).begin());
    const Matrix& b = config->input;
    for (std::size_t k = 0; k + 1 < n_samples; ++k) {
        auto yk = y.values().row(k);
        auto zk = z.row(k);
        auto zn = z.row(k + 1);
        for (std::size_t i = 0; i < nz; ++i) zn[i] = decay[i] * zk[i] + gain[i] * dot(b.row(i), yk);
    }
    return LiftedSeries{y.times(), std::move(z), std::move(config)};
}

void write_lifted_csv(const std::filesystem::path& path, const LiftedSeries& lifted) {
    io::write_table(path, lifted.times, lifted.states, "z");
}

SylvesterSolution solve_sylvester(const Matrix& f, const Matrix& h, const Matrix& a, const Matrix& b) {
    const std::size_t n = f.rows();
    const std::size_t nz = a.rows();
    if (f.cols() != n || a.cols() != nz) throw ValidationError("solve_sylvester: F and A must be square");
    if (h.cols() != n) throw ValidationError("solve_sylvester: H must have n columns");
    if (b.rows() != nz || b.cols() != h.rows()) throw ValidationError("solve_sylvester: B must be order × p");

    // Column-major vec: index of T(i, j) is j·nz + i.
    const std::size_t dim = nz * n;
    Matrix op(dim, dim);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t l = 0; l < n; ++l) {
            const double flj = f(l, j);  // (Fᵀ)(j, l)
            if (flj == 0.0) continue;
            for (std::size_t i = 0; i < nz; ++i) op(j * nz + i, l * nz + i) += flj;
        }
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < nz; ++i)
            for (std::size_t m = 0; m < nz; ++m) op(j * nz + i, j * nz + m) -= a(i, m);

    const Matrix bh = b * h;
    Vector rhs(dim);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < nz; ++i) rhs[j * nz + i] = bh(i, j);

    Vector vec_t;
    try {
        vec_t = solve_linear(op, rhs);
    } catch (const SingularMatrixError& e) {
        throw SingularMatrixError(std::string("solve_sylvester: spectra of F and A overlap; ") + e.what(),
                                  e.condition());
    }
    SylvesterSolution sol;
    sol.transform = Matrix(nz, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < nz; ++i) sol.transform(i, j) = vec_t[j * nz + i];
    sol.residual = max_abs(sol.transform * f - a * sol.transform - bh);
    return sol;
}

Vector observation_errors(const Trajectory& x_traj, const LiftedSeries& lifted, const SylvesterSolution& t) {
    if (x_traj.size() != lifted.times.size())
        throw ValidationError("observation_errors: trajectory and lifted series differ in length");
    if (t.transform.rows() != lifted.states.cols() || t.transform.cols() != x_traj.dimension())
        throw ValidationError("observation_errors: T has incompatible shape");
    const double scale = std::max(1.0, std::abs(lifted.times.back()));
    Vector err(x_traj.size());
    for (std::size_t k = 0; k < x_traj.size(); ++k) {
        if (std::abs(x_traj.times()[k] - lifted.times[k]) > 1e-9 * scale)
            throw ValidationError("observation_errors: series are not time-aligned at sample " + std::to_string(k));
        Vector tx = t.transform * x_traj.states().row(k);
        auto zk = lifted.states.row(k);
        for (std::size_t i = 0; i < tx.size(); ++i) tx[i] = zk[i] - tx[i];
        err[k] = norm2(tx);
    }
    return err;
}

ConvergenceFit verify_linear_convergence(const Trajectory& x_traj, const LiftedSeries& lifted,
                                         const SylvesterSolution& t) {
    const Vector err = observation_errors(x_traj, lifted, t);
    const std::size_t n = err.size();
    if (n < 10) throw ValidationError("verify_linear_convergence: need at least 10 samples");

    double signal = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        signal = std::max(signal, norm2(t.transform * x_traj.states().row(k)));
    double settled = 0.0;
    for (std::size_t k = n - std::max<std::size_t>(1, n / 10); k < n; ++k) settled = std::max(settled, err[k]);

    ConvergenceFit fit;
    fit.floor = std::max(10.0 * settled, 1e-12 * std::max(1.0, signal));
    std::size_t used = 0;
    while (used < n && err[used] > fit.floor) ++used;
    if (used < 3)
        throw DegenerateDataError("verify_linear_convergence: observation error is already at the numerical floor");

    double st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t k = 0; k < used; ++k) {
        const double tk = lifted.times[k];
        const double yk = std::log(err[k]);
        st += tk;
        sy += yk;
        stt += tk * tk;
        sty += tk * yk;
    }
    const double m = static_cast<double>(used);
    const double denom = m * stt - st * st;
    fit.slope = (m * sty - st * sy) / denom;
    fit.intercept = (sy - fit.slope * st) / m;
    fit.samples_used = used;
    return fit;
}

}  // namespace kkl
