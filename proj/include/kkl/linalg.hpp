#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kkl/matrix.hpp"

namespace kkl {

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
/// Column i of `eigenvectors` pairs with `eigenvalues[i]`.
struct SymEigResult {
    Vector eigenvalues;
    Matrix eigenvectors;
    int sweeps = 0;
};

/// Thin SVD M = U·diag(s)·Vᵀ with r = min(N, d).
struct ThinSvdResult {
    Matrix left;              // N×r
    Vector singular_values;   // r, non-increasing
    Matrix right;             // d×r
    std::size_t rank = 0;     // count of s_i > 1e-12·s_max
    /// true where the singular value fell below the rank threshold and the
    /// corresponding vectors were completed to an arbitrary orthonormal set.
    std::vector<bool> deficient;
};

struct JacobiOptions {
    double relative_tolerance = 1e-12;  // off(S)_F <= tol·‖S‖_F
    int max_sweeps = 100;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Eigenvalues come back sorted non-increasing; equal eigenvalues keep the
/// order of their diagonal position. Each eigenvector is signed so that its
/// largest-magnitude component is positive (lowest index wins ties), which
/// makes the output a deterministic function of the input bytes.
SymEigResult sym_eig(const Matrix& s, const JacobiOptions& options = {});

/// Thin SVD through the eigendecomposition of the smaller Gram matrix.
/// Right singular vectors follow the sym_eig sign convention.
ThinSvdResult thin_svd(const Matrix& m);

/// LU solve with partial pivoting. Throws SingularMatrixError when the
/// 1-norm condition estimate exceeds `max_condition`.
Vector solve_linear(const Matrix& a, std::span<const double> b, double max_condition = 1e14);

/// Flip the sign of each column so its largest-magnitude entry is positive.
/// Returns the applied signs (+1/-1).
std::vector<double> canonicalize_column_signs(Matrix& vectors);

}  // namespace kkl
