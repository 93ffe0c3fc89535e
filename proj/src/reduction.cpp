#include "kkl/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kkl/error.hpp"
#include "kkl/io.hpp"
#include "kkl/linalg.hpp"

namespace kkl {

Matrix WhitenModel::apply(const Matrix& z) const {
    if (z.cols() != features)
        throw ValidationError("whiten: expected " + std::to_string(features) + " features, got " +
                              std::to_string(z.cols()));
    Matrix out(z.rows(), retained.size());
    for (std::size_t k = 0; k < z.rows(); ++k) {
        auto src = z.row(k);
        auto dst = out.row(k);
        for (std::size_t j = 0; j < retained.size(); ++j) {
            const std::size_t f = retained[j];
            dst[j] = (src[f] - means[f]) / stds[f];
        }
    }
    return out;
}

WhitenModel fit_whiten(const Matrix& z) {
    if (z.rows() < 2) throw ValidationError("fit_whiten: need at least two samples");
    if (z.cols() == 0) throw ValidationError("fit_whiten: no features");
    const std::size_t n = z.rows();
    const std::size_t d = z.cols();
    WhitenModel w;
    w.features = d;
    w.means.assign(d, 0.0);
    w.stds.assign(d, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        auto r = z.row(k);
        for (std::size_t j = 0; j < d; ++j) w.means[j] += r[j];
    }
    for (double& m : w.means) m /= static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        auto r = z.row(k);
        for (std::size_t j = 0; j < d; ++j) {
            const double c = r[j] - w.means[j];
            w.stds[j] += c * c;
        }
    }
    for (double& s : w.stds) s = std::sqrt(s / static_cast<double>(n - 1));

    for (std::size_t j = 0; j < d; ++j) {
        if (w.stds[j] < kStdEpsilon * std::max(1.0, std::abs(w.means[j])))
            w.dropped.push_back(j);
        else
            w.retained.push_back(j);
    }
    if (!w.dropped.empty()) {
        std::ostringstream msg;
        msg << "dropped " << w.dropped.size() << " near-constant feature(s):";
        for (std::size_t i = 0; i < std::min<std::size_t>(w.dropped.size(), 10); ++i) msg << ' ' << w.dropped[i];
        if (w.dropped.size() > 10) msg << " ...";
        w.warnings.push_back(msg.str());
    }
    if (w.retained.empty()) throw DegenerateDataError("fit_whiten: every feature is constant");
    return w;
}

Vector PcaModel::project(std::span<const double> z) const {
    if (z.size() != q_matrix.cols())
        throw ValidationError("project: expected " + std::to_string(q_matrix.cols()) + " features, got " +
                              std::to_string(z.size()));
    Vector out = q_matrix * z;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= q_offset[i];
    return out;
}

Matrix PcaModel::project_rows(const Matrix& z) const {
    Matrix out(z.rows(), target_dim);
    for (std::size_t k = 0; k < z.rows(); ++k) {
        const Vector p = project(z.row(k));
        std::copy(p.begin(), p.end(), out.row(k).begin());
    }
    return out;
}

Vector project(const PcaModel& model, std::span<const double> z) { return model.project(z); }

namespace {

void finish_affine_map(PcaModel& m) {
    const auto& w = m.whiten;
    m.q_matrix = Matrix(m.target_dim, w.features);
    for (std::size_t i = 0; i < m.target_dim; ++i)
        for (std::size_t j = 0; j < w.retained.size(); ++j) {
            const std::size_t f = w.retained[j];
            m.q_matrix(i, f) = m.basis(j, i) / w.stds[f];
        }
    m.q_offset = m.q_matrix * w.means;
}

}  // namespace

PcaModel fit_pca(const Matrix& z, const WhitenModel& whiten, std::size_t target_dim) {
    if (z.cols() != whiten.features) throw ValidationError("fit_pca: data does not match the whitening model");
    const std::size_t n = z.rows();
    const std::size_t r = whiten.retained.size();
    if (target_dim == 0) throw ValidationError("fit_pca: target dimension must be positive");
    if (n < 2 || target_dim > std::min(n - 1, r))
        throw ValidationError("fit_pca: target dimension " + std::to_string(target_dim) + " exceeds min(N-1, " +
                              "retained features) = " + std::to_string(std::min(n > 0 ? n - 1 : 0, r)));

    const ThinSvdResult svd = thin_svd(whiten.apply(z));
    const double denom = static_cast<double>(n - 1);

    PcaModel m;
    m.whiten = whiten;
    m.target_dim = target_dim;
    m.fit_samples = n;
    m.spectrum.resize(svd.singular_values.size());
    for (std::size_t i = 0; i < m.spectrum.size(); ++i)
        m.spectrum[i] = svd.singular_values[i] * svd.singular_values[i] / denom;
    m.eigenvalues.assign(m.spectrum.begin(), m.spectrum.begin() + static_cast<std::ptrdiff_t>(target_dim));
    m.basis = Matrix(r, target_dim);
    for (std::size_t i = 0; i < target_dim; ++i)
        for (std::size_t j = 0; j < r; ++j) m.basis(j, i) = svd.right(j, i);
    m.explained_ratios.resize(target_dim);
    for (std::size_t i = 0; i < target_dim; ++i) {
        m.explained_ratios[i] = m.eigenvalues[i] / static_cast<double>(r);
        m.explained_ratio += m.explained_ratios[i];
    }
    finish_affine_map(m);
    return m;
}

Reduction reduce_series(const LiftedSeries& lifted, std::size_t target_dim, const ReduceOptions& options) {
    if (!lifted.config && !options.trim_time)
        throw ValidationError("reduce_series: trim time needs the observer configuration");
    if (!(options.fit_fraction > 0.0 && options.fit_fraction <= 1.0))
        throw ValidationError("reduce_series: fit fraction must lie in (0, 1]");
    const std::size_t n = lifted.times.size();
    if (n == 0) throw ValidationError("reduce_series: empty lifted series");

    Reduction out;
    out.trim_time = options.trim_time.value_or(5.0 / lifted.config->slowest_rate());
    if (!(out.trim_time >= 0.0)) throw ValidationError("reduce_series: trim time must be non-negative");
    const double t0 = lifted.times.front();
    std::size_t begin = 0;
    while (begin < n && lifted.times[begin] - t0 < out.trim_time * (1.0 - 1e-12)) ++begin;
    const auto end = static_cast<std::size_t>(std::floor(options.fit_fraction * static_cast<double>(n) + 1e-9));
    const std::size_t fit_count = end > begin ? end - begin : 0;
    if (fit_count < target_dim + 1 || fit_count < 2)
        throw ValidationError("reduce_series: " + std::to_string(fit_count) +
                              " post-transient samples in the fit window; need at least " +
                              std::to_string(std::max<std::size_t>(target_dim + 1, 2)));

    const Matrix fit_rows = lifted.states.row_slice(begin, end);
    out.model = fit_pca(fit_rows, fit_whiten(fit_rows), target_dim);
    out.fit_begin = begin;
    out.fit_end = end;
    out.series.times = lifted.times;
    out.series.components = out.model.project_rows(lifted.states);
    out.series.in_fit.assign(n, false);
    for (std::size_t k = begin; k < end; ++k) out.series.in_fit[k] = true;
    return out;
}

nlohmann::json pca_to_json(const PcaModel& m) {
    nlohmann::json doc;
    doc["features"] = m.whiten.features;
    doc["target_dim"] = m.target_dim;
    doc["fit_samples"] = m.fit_samples;
    doc["means"] = m.whiten.means;
    doc["stds"] = m.whiten.stds;
    doc["dropped"] = m.whiten.dropped;
    doc["eigenvalues"] = m.eigenvalues;
    doc["spectrum"] = m.spectrum;
    doc["explained_ratios"] = m.explained_ratios;
    doc["explained_ratio"] = m.explained_ratio;
    doc["q_matrix"] = {{"rows", m.q_matrix.rows()},
                       {"cols", m.q_matrix.cols()},
                       {"data", std::vector<double>(m.q_matrix.data().begin(), m.q_matrix.data().end())}};
    doc["q_offset"] = m.q_offset;
    return doc;
}

PcaModel pca_from_json(const nlohmann::json& doc) {
    try {
        PcaModel m;
        auto& w = m.whiten;
        w.features = doc.at("features").get<std::size_t>();
        w.means = doc.at("means").get<Vector>();
        w.stds = doc.at("stds").get<Vector>();
        w.dropped = doc.at("dropped").get<std::vector<std::size_t>>();
        if (w.means.size() != w.features || w.stds.size() != w.features)
            throw ValidationError("PCA document: means/stds length mismatch");
        std::vector<bool> is_dropped(w.features, false);
        for (auto j : w.dropped) {
            if (j >= w.features) throw ValidationError("PCA document: dropped index out of range");
            is_dropped[j] = true;
        }
        for (std::size_t j = 0; j < w.features; ++j)
            if (!is_dropped[j]) w.retained.push_back(j);
        m.target_dim = doc.at("target_dim").get<std::size_t>();
        m.fit_samples = doc.at("fit_samples").get<std::size_t>();
        m.eigenvalues = doc.at("eigenvalues").get<Vector>();
        m.spectrum = doc.at("spectrum").get<Vector>();
        m.explained_ratios = doc.at("explained_ratios").get<Vector>();
        m.explained_ratio = doc.at("explained_ratio").get<double>();
        const auto& qm = doc.at("q_matrix");
        m.q_matrix = Matrix(qm.at("rows").get<std::size_t>(), qm.at("cols").get<std::size_t>(),
                            qm.at("data").get<std::vector<double>>());
        m.q_offset = doc.at("q_offset").get<Vector>();
        if (m.q_matrix.rows() != m.target_dim || m.q_matrix.cols() != w.features || m.q_offset.size() != m.target_dim)
            throw ValidationError("PCA document: affine map has the wrong shape");
        m.basis = Matrix(w.retained.size(), m.target_dim);
        for (std::size_t i = 0; i < m.target_dim; ++i)
            for (std::size_t j = 0; j < w.retained.size(); ++j)
                m.basis(j, i) = m.q_matrix(i, w.retained[j]) * w.stds[w.retained[j]];
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("PCA document: ") + e.what());
    }
}

void write_components_csv(const std::filesystem::path& path, const ComponentSeries& series) {
    io::write_table(path, series.times, series.components, "pi");
}

ComponentSeries read_components_csv(const std::filesystem::path& path) {
    auto table = io::read_table(path, "pi");
    ComponentSeries s;
    s.in_fit.assign(table.times.size(), true);
    s.times = std::move(table.times);
    s.components = std::move(table.values);
    return s;
}

}  // namespace kkl
