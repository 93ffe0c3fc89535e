#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace kkl {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> d);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    Vector column(std::size_t j) const;
    void set_column(std::size_t j, std::span<const double> values);

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    Matrix transposed() const;
    /// Rows [begin, end).
    Matrix row_slice(std::size_t begin, std::size_t end) const;
    Matrix select_rows(std::span<const std::size_t> indices) const;

    bool all_finite() const noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, std::span<const double> x);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

/// aᵀ·b without forming the transpose.
Matrix transpose_times(const Matrix& a, const Matrix& b);
/// a·aᵀ.
Matrix gram_rows(const Matrix& a);
/// aᵀ·a.
Matrix gram_cols(const Matrix& a);

double max_abs(const Matrix& a) noexcept;
double max_abs(std::span<const double> v) noexcept;
double frobenius_norm(const Matrix& a) noexcept;
double norm2(std::span<const double> v) noexcept;
double dot(std::span<const double> a, std::span<const double> b) noexcept;

}  // namespace kkl
