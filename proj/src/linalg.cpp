#include "kkl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "kkl/error.hpp"

namespace kkl {
namespace {

using Columns = std::vector<Vector>;

void require_finite(const Matrix& m, const char* what) {
    if (!m.all_finite()) throw ValidationError(std::string(what) + ": matrix has non-finite entries");
}

double signed_peak(std::span<const double> v) {
    const double m = max_abs(v);
    if (m == 0.0) return 1.0;
    const double cutoff = m * (1.0 - 1e-12);
    for (double x : v)
        if (std::abs(x) >= cutoff) return x;
    return 1.0;
}

void axpy(double alpha, const Vector& x, Vector& y) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

// Two passes of modified Gram-Schmidt against `basis`, then normalize.
// Returns the norm before normalization.
double orthogonalize_and_normalize(Vector& v, const Columns& basis) {
    for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : basis) axpy(-dot(q, v), q, v);
    const double nrm = norm2(v);
    if (nrm > 0.0)
        for (double& x : v) x /= nrm;
    return nrm;
}

// Orthonormalizes the non-deficient columns in order, then fills the
// deficient ones with standard basis vectors orthogonal to everything else.
Columns finish_basis(Columns cols, std::vector<bool>& deficient) {
    Columns done;
    done.reserve(cols.size());
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (deficient[i]) continue;
        const double before = norm2(cols[i]);
        Vector v = cols[i];
        const double after = orthogonalize_and_normalize(v, done);
        if (before == 0.0 || after < 0.5 * before) {
            deficient[i] = true;
            continue;
        }
        cols[i] = v;
        done.push_back(v);
    }
    // Each gap takes the standard axis with the largest component outside the
    // current span (lowest index on ties): its residual is at least
    // sqrt((dim − |done|)/dim), so the result stays well conditioned.
    const std::size_t dim = cols.empty() ? 0 : cols.front().size();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (!deficient[i]) continue;
        if (done.size() >= dim) throw NumericalError("thin_svd: failed to complete orthonormal basis");
        Vector outside(dim, 1.0);
        for (const auto& q : done)
            for (std::size_t a = 0; a < dim; ++a) outside[a] -= q[a] * q[a];
        const auto best = static_cast<std::size_t>(std::max_element(outside.begin(), outside.end()) - outside.begin());
        Vector e(dim, 0.0);
        e[best] = 1.0;
        if (!(orthogonalize_and_normalize(e, done) > 0.0))
            throw NumericalError("thin_svd: failed to complete orthonormal basis");
        cols[i] = e;
        done.push_back(std::move(e));
    }
    return cols;
}

Matrix assemble(const Columns& cols, std::size_t rows) {
    Matrix m(rows, cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) m.set_column(j, cols[j]);
    return m;
}

}  // namespace

std::vector<double> canonicalize_column_signs(Matrix& vectors) {
    std::vector<double> signs(vectors.cols(), 1.0);
    for (std::size_t j = 0; j < vectors.cols(); ++j) {
        const Vector col = vectors.column(j);
        if (signed_peak(col) < 0.0) {
            signs[j] = -1.0;
            for (std::size_t i = 0; i < vectors.rows(); ++i) vectors(i, j) = -vectors(i, j);
        }
    }
    return signs;
}

SymEigResult sym_eig(const Matrix& s, const JacobiOptions& options) {
    if (s.rows() != s.cols()) throw ValidationError("sym_eig: matrix is not square");
    require_finite(s, "sym_eig");
    const std::size_t n = s.rows();
    const double scale = max_abs(s);
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            if (std::abs(s(i, j) - s(j, i)) > 1e-10 * scale)
                throw ValidationError("sym_eig: matrix is not symmetric");
            const double v = 0.5 * (s(i, j) + s(j, i));
            a(i, j) = v;
            a(j, i) = v;
        }
    }

    // Rows of vt are the eigenvectors.
    Matrix vt = Matrix::identity(n);
    const double target = options.relative_tolerance * frobenius_norm(a);
    int sweep = 0;
    for (;; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * a(p, q) * a(p, q);
        if (std::sqrt(off) <= target) break;
        if (sweep >= options.max_sweeps) {
            std::ostringstream msg;
            msg << "sym_eig: no convergence after " << options.max_sweeps
                << " sweeps (off-diagonal norm " << std::sqrt(off) << ")";
            throw NumericalError(msg.str());
        }
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t = std::abs(theta) > 1e150 ? 0.5 / std::abs(theta)
                                                   : 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                if (theta < 0.0) t = -t;
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                const double tau = sn / (1.0 + c);
                a(p, p) -= t * apq;
                a(q, q) += t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    if (r == p || r == q) continue;
                    const double arp = a(r, p);
                    const double arq = a(r, q);
                    const double np = arp - sn * (arq + tau * arp);
                    const double nq = arq + sn * (arp - tau * arq);
                    a(r, p) = np;
                    a(p, r) = np;
                    a(r, q) = nq;
                    a(q, r) = nq;
                }
                auto vp = vt.row(p);
                auto vq = vt.row(q);
                for (std::size_t r = 0; r < n; ++r) {
                    const double xp = vp[r];
                    const double xq = vq[r];
                    vp[r] = xp - sn * (xq + tau * xp);
                    vq[r] = xq + sn * (xp - tau * xq);
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    SymEigResult out;
    out.sweeps = sweep;
    out.eigenvalues.resize(n);
    out.eigenvectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.eigenvalues[k] = a(order[k], order[k]);
        out.eigenvectors.set_column(k, vt.row(order[k]));
    }
    canonicalize_column_signs(out.eigenvectors);
    return out;
}

ThinSvdResult thin_svd(const Matrix& m) {
    if (m.empty()) throw ValidationError("thin_svd: empty matrix");
    require_finite(m, "thin_svd");
    const std::size_t rows = m.rows();
    const std::size_t cols = m.cols();
    const bool tall = rows >= cols;
    const std::size_t r = std::min(rows, cols);

    // Eigenvectors of the small Gram matrix give one side; the other side is
    // recovered by applying M (or Mᵀ) and normalizing.
    const SymEigResult eig = sym_eig(tall ? gram_cols(m) : gram_rows(m));
    const Matrix& basis = eig.eigenvectors;
    const Matrix mt = tall ? Matrix() : m.transposed();
    const Matrix& apply = tall ? m : mt;

    Columns primary(r), derived(r);
    Vector sigma(r);
    for (std::size_t k = 0; k < r; ++k) {
        primary[k] = basis.column(k);
        derived[k] = apply * primary[k];
        sigma[k] = norm2(derived[k]);
    }
    std::vector<std::size_t> order(r);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

    ThinSvdResult out;
    out.singular_values.resize(r);
    Columns p_sorted(r), d_sorted(r);
    for (std::size_t k = 0; k < r; ++k) {
        out.singular_values[k] = sigma[order[k]];
        p_sorted[k] = std::move(primary[order[k]]);
        d_sorted[k] = std::move(derived[order[k]]);
    }
    const double smax = out.singular_values.empty() ? 0.0 : out.singular_values.front();
    out.deficient.assign(r, false);
    for (std::size_t k = 0; k < r; ++k) {
        if (smax == 0.0 || out.singular_values[k] <= 1e-12 * smax) {
            out.deficient[k] = true;
            out.singular_values[k] = smax == 0.0 ? 0.0 : out.singular_values[k];
        }
    }
    std::vector<bool> primary_flags = out.deficient;
    for (std::size_t k = 0; k < r; ++k) primary_flags[k] = primary_flags[k] && smax == 0.0;
    p_sorted = finish_basis(std::move(p_sorted), primary_flags);
    d_sorted = finish_basis(std::move(d_sorted), out.deficient);
    out.rank = static_cast<std::size_t>(std::count(out.deficient.begin(), out.deficient.end(), false));

    Matrix left = assemble(tall ? d_sorted : p_sorted, rows);
    Matrix right = assemble(tall ? p_sorted : d_sorted, cols);
    const auto signs = canonicalize_column_signs(right);
    for (std::size_t k = 0; k < r; ++k)
        if (signs[k] < 0.0)
            for (std::size_t i = 0; i < rows; ++i) left(i, k) = -left(i, k);
    out.left = std::move(left);
    out.right = std::move(right);
    return out;
}

Vector solve_linear(const Matrix& a, std::span<const double> b, double max_condition) {
    if (a.rows() != a.cols()) throw ValidationError("solve_linear: matrix is not square");
    if (b.size() != a.rows()) throw ValidationError("solve_linear: right-hand side length mismatch");
    require_finite(a, "solve_linear");
    const std::size_t n = a.rows();
    Matrix lu = a;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});

    double norm1 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += std::abs(a(i, j));
        norm1 = std::max(norm1, s);
    }
    const double inf = std::numeric_limits<double>::infinity();
    if (norm1 == 0.0) throw SingularMatrixError("solve_linear: zero matrix", inf);

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
        if (lu(piv, k) == 0.0) throw SingularMatrixError("solve_linear: matrix is singular", inf);
        if (piv != k) {
            std::swap_ranges(lu.row(k).begin(), lu.row(k).end(), lu.row(piv).begin());
            std::swap(perm[k], perm[piv]);
        }
        const double d = lu(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = lu(i, k) / d;
            lu(i, k) = f;
            if (f == 0.0) continue;
            auto ri = lu.row(i);
            auto rk = lu.row(k);
            for (std::size_t j = k + 1; j < n; ++j) ri[j] -= f * rk[j];
        }
    }

    auto substitute = [&](std::span<const double> rhs) {
        Vector x(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = rhs[perm[i]];
            for (std::size_t j = 0; j < i; ++j) s -= lu(i, j) * x[j];
            x[i] = s;
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x[i];
            for (std::size_t j = i + 1; j < n; ++j) s -= lu(i, j) * x[j];
            x[i] = s / lu(i, i);
        }
        return x;
    };

    // ‖A⁻¹‖₁ column by column; exact, and cheap at the sizes used here.
    double inv_norm1 = 0.0;
    Vector e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        const Vector col = substitute(e);
        e[j] = 0.0;
        double s = 0.0;
        for (double v : col) s += std::abs(v);
        inv_norm1 = std::max(inv_norm1, s);
    }
    const double condition = norm1 * inv_norm1;
    if (!std::isfinite(condition) || condition > max_condition) {
        std::ostringstream msg;
        msg << "solve_linear: matrix is ill-conditioned (condition estimate " << condition << ")";
        throw SingularMatrixError(msg.str(), condition);
    }
    return substitute(b);
}

}  // namespace kkl
