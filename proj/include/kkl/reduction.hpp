#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kkl/lifting.hpp"
#include "kkl/matrix.hpp"

namespace kkl {

/// Per-feature standardization statistics.
struct WhitenModel {
    std::size_t features = 0;
    Vector means;                       // all features
    Vector stds;                        // all features, sample (N−1) denominator
    std::vector<std::size_t> retained;  // ascending
    std::vector<std::size_t> dropped;   // ascending, near-constant features
    std::vector<std::string> warnings;

    /// Standardized retained columns, N × retained.size().
    Matrix apply(const Matrix& z) const;
};

/// Relative threshold below which a feature counts as constant.
inline constexpr double kStdEpsilon = 1e-12;

WhitenModel fit_whiten(const Matrix& z);

/// Affine reduction P(z) = Qz − q onto the leading principal components.
struct PcaModel {
    WhitenModel whiten;
    std::size_t target_dim = 0;
    Matrix basis;              // retained × n, orthonormal columns
    Vector eigenvalues;        // leading n, descending
    Vector spectrum;           // every eigenvalue the SVD produced, descending
    Vector explained_ratios;   // λ_i / retained count, leading n
    double explained_ratio = 0.0;  // Σ_{i≤n} λ_i / retained count
    Matrix q_matrix;           // n × features, zero columns for dropped features
    Vector q_offset;           // Q·z̄
    std::size_t fit_samples = 0;

    Vector project(std::span<const double> z) const;
    Matrix project_rows(const Matrix& z) const;
};

/// Principal components of the whitened data, via thin SVD.
/// Eigenvalues are σ²/(N−1).
PcaModel fit_pca(const Matrix& z, const WhitenModel& whiten, std::size_t target_dim);

/// Qz − q.
Vector project(const PcaModel& model, std::span<const double> z);

struct ComponentSeries {
    Vector times;
    Matrix components;       // N × n
    std::vector<bool> in_fit;
};

struct ReduceOptions {
    /// Samples with t − t₀ below this are excluded from the fit. Defaults to
    /// five time constants of the slowest observer mode, 5/a_min.
    std::optional<double> trim_time;
    /// Only the first ⌊fraction·N⌋ samples are eligible for the fit.
    double fit_fraction = 1.0;
};

struct Reduction {
    PcaModel model;
    ComponentSeries series;
    double trim_time = 0.0;
    std::size_t fit_begin = 0;  // first fitted sample
    std::size_t fit_end = 0;    // one past the last fitted sample
};

/// Fits whitening and PCA on the post-transient window and projects every
/// sample, recording which ones took part in the fit.
Reduction reduce_series(const LiftedSeries& lifted, std::size_t target_dim, const ReduceOptions& options = {});

nlohmann::json pca_to_json(const PcaModel& model);
PcaModel pca_from_json(const nlohmann::json& doc);

void write_components_csv(const std::filesystem::path& path, const ComponentSeries& series);
ComponentSeries read_components_csv(const std::filesystem::path& path);

}  // namespace kkl
