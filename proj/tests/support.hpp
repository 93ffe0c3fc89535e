#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "kkl/matrix.hpp"

namespace test {

inline kkl::Matrix random_matrix(std::mt19937_64& gen, std::size_t rows, std::size_t cols, double lo = -1.0,
                                 double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    kkl::Matrix m(rows, cols);
    for (double& v : m.data()) v = d(gen);
    return m;
}

inline kkl::Matrix random_symmetric(std::mt19937_64& gen, std::size_t n) {
    kkl::Matrix a = random_matrix(gen, n, n);
    kkl::Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) s(i, j) = a(i, j) + a(j, i);
    return s;
}

inline double max_diff(const kkl::Matrix& a, const kkl::Matrix& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
    return m;
}

inline double orthonormality_error(const kkl::Matrix& v) {
    return max_diff(kkl::transpose_times(v, v), kkl::Matrix::identity(v.cols()));
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("kkl-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace test
