/*
 * Dense numerical kernels: matrices, LU with partial pivoting, composite
 * Gauss-Legendre quadrature, finite-difference Jacobians and the rank-3
 * tensor contraction used by index-2 reduction.
 */
#pragma once

#include "errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace adjdae {

using Vec = std::vector<double>;

/// Row-major dense matrix.
class DenseMatrix
{
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double value = 0.0)
        : m_rows(rows), m_cols(cols), m_data(rows * cols, value)
    {
    }
    DenseMatrix(std::size_t rows, std::size_t cols, Vec entries)
        : m_rows(rows), m_cols(cols), m_data(std::move(entries))
    {
        if(m_data.size() != rows * cols)
            throw Error(ErrorKind::DimensionMismatch, "entry count does not match rows*cols");
    }
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows)
    {
        m_rows = rows.size();
        m_cols = m_rows ? rows.begin()->size() : 0;
        m_data.reserve(m_rows * m_cols);
        for(const auto &row : rows)
        {
            if(row.size() != m_cols)
                throw Error(ErrorKind::DimensionMismatch, "ragged matrix literal");
            m_data.insert(m_data.end(), row.begin(), row.end());
        }
    }

    [[nodiscard]] static DenseMatrix identity(std::size_t n)
    {
        DenseMatrix I(n, n);
        for(std::size_t i = 0; i < n; ++i)
            I(i, i) = 1.0;
        return I;
    }

    [[nodiscard]] std::size_t rows() const noexcept { return m_rows; }
    [[nodiscard]] std::size_t cols() const noexcept { return m_cols; }
    [[nodiscard]] const Vec &data() const noexcept { return m_data; }
    [[nodiscard]] Vec &data() noexcept { return m_data; }

    double &operator()(std::size_t i, std::size_t j) noexcept { return m_data[i * m_cols + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return m_data[i * m_cols + j]; }

    [[nodiscard]] DenseMatrix transpose() const
    {
        DenseMatrix t(m_cols, m_rows);
        for(std::size_t i = 0; i < m_rows; ++i)
            for(std::size_t j = 0; j < m_cols; ++j)
                t(j, i) = (*this)(i, j);
        return t;
    }

    [[nodiscard]] double max_abs() const noexcept
    {
        double s = 0.0;
        for(double v : m_data)
            s = std::max(s, std::abs(v));
        return s;
    }

    [[nodiscard]] bool all_finite() const noexcept
    {
        return std::all_of(m_data.begin(), m_data.end(), [](double v) { return std::isfinite(v); });
    }

private:
    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    Vec m_data;
};

/// Rank-3 tensor of shape (m, n, n); slice i is the Hessian of constraint i.
class Tensor3
{
public:
    Tensor3() = default;
    Tensor3(std::size_t m, std::size_t n) : m_m(m), m_n(n), m_data(m * n * n, 0.0) {}

    [[nodiscard]] std::size_t dim0() const noexcept { return m_m; }
    [[nodiscard]] std::size_t dim1() const noexcept { return m_n; }
    [[nodiscard]] const Vec &data() const noexcept { return m_data; }

    double &operator()(std::size_t i, std::size_t j, std::size_t k) noexcept
    {
        return m_data[(i * m_n + j) * m_n + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept
    {
        return m_data[(i * m_n + j) * m_n + k];
    }

private:
    std::size_t m_m = 0;
    std::size_t m_n = 0;
    Vec m_data;
};

// ---------------------------------------------------------------------------
// Vector helpers
// ---------------------------------------------------------------------------

[[nodiscard]] inline double dot(const Vec &a, const Vec &b)
{
    if(a.size() != b.size())
        throw Error(ErrorKind::DimensionMismatch, "dot: length mismatch");
    double s = 0.0;
    for(std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

[[nodiscard]] inline double inf_norm(const Vec &a) noexcept
{
    double s = 0.0;
    for(double v : a)
    {
        if(std::isnan(v))
            return v; // std::max would silently drop it
        s = std::max(s, std::abs(v));
    }
    return s;
}

[[nodiscard]] inline bool all_finite(const Vec &a) noexcept
{
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

[[nodiscard]] inline Vec operator+(const Vec &a, const Vec &b)
{
    if(a.size() != b.size())
        throw Error(ErrorKind::DimensionMismatch, "vector add: length mismatch");
    Vec c(a.size());
    for(std::size_t i = 0; i < a.size(); ++i)
        c[i] = a[i] + b[i];
    return c;
}

[[nodiscard]] inline Vec operator-(const Vec &a, const Vec &b)
{
    if(a.size() != b.size())
        throw Error(ErrorKind::DimensionMismatch, "vector sub: length mismatch");
    Vec c(a.size());
    for(std::size_t i = 0; i < a.size(); ++i)
        c[i] = a[i] - b[i];
    return c;
}

[[nodiscard]] inline Vec operator*(double s, const Vec &a)
{
    Vec c(a.size());
    for(std::size_t i = 0; i < a.size(); ++i)
        c[i] = s * a[i];
    return c;
}

/// y += s * x
inline void axpy(double s, const Vec &x, Vec &y)
{
    if(x.size() != y.size())
        throw Error(ErrorKind::DimensionMismatch, "axpy: length mismatch");
    for(std::size_t i = 0; i < x.size(); ++i)
        y[i] += s * x[i];
}

/// (1-theta)*a + theta*b
[[nodiscard]] inline Vec lerp(const Vec &a, const Vec &b, double theta)
{
    Vec c(a.size());
    for(std::size_t i = 0; i < a.size(); ++i)
        c[i] = (1.0 - theta) * a[i] + theta * b[i];
    return c;
}

// ---------------------------------------------------------------------------
// Matrix helpers
// ---------------------------------------------------------------------------

[[nodiscard]] inline Vec matvec(const DenseMatrix &A, const Vec &x)
{
    if(A.cols() != x.size())
        throw Error(ErrorKind::DimensionMismatch, "matvec: A is " + std::to_string(A.rows()) + "x" +
                                                      std::to_string(A.cols()) + ", x has " +
                                                      std::to_string(x.size()));
    Vec y(A.rows(), 0.0);
    for(std::size_t i = 0; i < A.rows(); ++i)
    {
        double s = 0.0;
        const double *row = A.data().data() + i * A.cols();
        for(std::size_t j = 0; j < A.cols(); ++j)
            s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

/// A^T x without forming the transpose.
[[nodiscard]] inline Vec matvec_t(const DenseMatrix &A, const Vec &x)
{
    if(A.rows() != x.size())
        throw Error(ErrorKind::DimensionMismatch, "matvec_t: length mismatch");
    Vec y(A.cols(), 0.0);
    for(std::size_t i = 0; i < A.rows(); ++i)
    {
        const double xi = x[i];
        if(xi == 0.0)
            continue;
        const double *row = A.data().data() + i * A.cols();
        for(std::size_t j = 0; j < A.cols(); ++j)
            y[j] += row[j] * xi;
    }
    return y;
}

[[nodiscard]] inline DenseMatrix matmul(const DenseMatrix &A, const DenseMatrix &B)
{
    if(A.cols() != B.rows())
        throw Error(ErrorKind::DimensionMismatch, "matmul: inner dimensions differ");
    DenseMatrix C(A.rows(), B.cols());
    for(std::size_t i = 0; i < A.rows(); ++i)
        for(std::size_t k = 0; k < A.cols(); ++k)
        {
            const double a = A(i, k);
            if(a == 0.0)
                continue;
            for(std::size_t j = 0; j < B.cols(); ++j)
                C(i, j) += a * B(k, j);
        }
    return C;
}

[[nodiscard]] inline DenseMatrix operator-(const DenseMatrix &A, const DenseMatrix &B)
{
    if(A.rows() != B.rows() || A.cols() != B.cols())
        throw Error(ErrorKind::DimensionMismatch, "matrix sub: shape mismatch");
    DenseMatrix C(A.rows(), A.cols());
    for(std::size_t i = 0; i < A.data().size(); ++i)
        C.data()[i] = A.data()[i] - B.data()[i];
    return C;
}

// ---------------------------------------------------------------------------
// LU factorization with partial pivoting
// ---------------------------------------------------------------------------

inline constexpr double default_pivot_floor = 1e-14;

/**
 * LU factorization PA = LU with row partial pivoting.
 *
 * A pivot is rejected when its magnitude falls below `pivot_floor * max|A_ij|`,
 * i.e. the floor is relative to the matrix scale.
 */
class LU
{
public:
    LU() = default;
    explicit LU(DenseMatrix A, double pivot_floor = default_pivot_floor) { factor(std::move(A), pivot_floor); }

    void factor(DenseMatrix A, double pivot_floor = default_pivot_floor)
    {
        if(A.rows() != A.cols())
            throw Error(ErrorKind::DimensionMismatch, "LU: matrix is not square");
        if(!A.all_finite())
            throw Error(ErrorKind::NonFiniteValue, "LU: matrix has non-finite entries");
        const std::size_t n = A.rows();
        m_perm.resize(n);
        for(std::size_t i = 0; i < n; ++i)
            m_perm[i] = i;
        const double scale = A.max_abs();
        const double floor = pivot_floor * (scale > 0.0 ? scale : 1.0);

        double *a = A.data().data();
        for(std::size_t k = 0; k < n; ++k)
        {
            std::size_t p = k;
            double best = std::abs(a[k * n + k]);
            for(std::size_t i = k + 1; i < n; ++i)
            {
                const double v = std::abs(a[i * n + k]);
                if(v > best)
                {
                    best = v;
                    p = i;
                }
            }
            if(!(best > floor))
                throw Error(ErrorKind::SingularMatrix,
                            "pivot " + std::to_string(best) + " below floor at column " + std::to_string(k));
            if(p != k)
            {
                std::swap_ranges(a + k * n, a + (k + 1) * n, a + p * n);
                std::swap(m_perm[k], m_perm[p]);
            }
            const double inv = 1.0 / a[k * n + k];
            for(std::size_t i = k + 1; i < n; ++i)
            {
                double &lik = a[i * n + k];
                if(lik == 0.0)
                    continue;
                lik *= inv;
                const double l = lik;
                double *ri = a + i * n;
                const double *rk = a + k * n;
                for(std::size_t j = k + 1; j < n; ++j)
                    ri[j] -= l * rk[j];
            }
        }
        m_lu = std::move(A);
    }

    [[nodiscard]] std::size_t size() const noexcept { return m_lu.rows(); }

    [[nodiscard]] Vec solve(const Vec &b) const
    {
        const std::size_t n = m_lu.rows();
        if(b.size() != n)
            throw Error(ErrorKind::DimensionMismatch, "LU solve: rhs length mismatch");
        Vec x(n);
        for(std::size_t i = 0; i < n; ++i)
            x[i] = b[m_perm[i]];
        const double *a = m_lu.data().data();
        for(std::size_t i = 0; i < n; ++i)
        {
            double s = x[i];
            for(std::size_t j = 0; j < i; ++j)
                s -= a[i * n + j] * x[j];
            x[i] = s;
        }
        for(std::size_t ii = n; ii-- > 0;)
        {
            double s = x[ii];
            for(std::size_t j = ii + 1; j < n; ++j)
                s -= a[ii * n + j] * x[j];
            x[ii] = s / a[ii * n + ii];
        }
        return x;
    }

    /// Solves A X = B column by column.
    [[nodiscard]] DenseMatrix solve(const DenseMatrix &B) const
    {
        DenseMatrix X(B.rows(), B.cols());
        Vec col(B.rows());
        for(std::size_t j = 0; j < B.cols(); ++j)
        {
            for(std::size_t i = 0; i < B.rows(); ++i)
                col[i] = B(i, j);
            Vec x = solve(col);
            for(std::size_t i = 0; i < B.rows(); ++i)
                X(i, j) = x[i];
        }
        return X;
    }

private:
    DenseMatrix m_lu;
    std::vector<std::size_t> m_perm;
};

[[nodiscard]] inline Vec lu_solve(const DenseMatrix &A, const Vec &b, double pivot_floor = default_pivot_floor)
{
    return LU(A, pivot_floor).solve(b);
}

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature
// ---------------------------------------------------------------------------

/// Nodes of the 5-point Gauss-Legendre rule on [-1, 1].
inline constexpr std::array<double, 5> gl5_nodes = {
    -0.9061798459386639927976269, -0.5384693101056830910363144, 0.0,
    0.5384693101056830910363144, 0.9061798459386639927976269};

inline constexpr std::array<double, 5> gl5_weights = {
    0.2369268850561890875142640, 0.4786286704993664680412915, 0.5688888888888888888888889,
    0.4786286704993664680412915, 0.2369268850561890875142640};

/// Neumaier-compensated running sums of a fixed-length vector.
class CompensatedSum
{
public:
    explicit CompensatedSum(std::size_t n = 0) : m_sum(n, 0.0), m_c(n, 0.0) {}

    [[nodiscard]] std::size_t size() const noexcept { return m_sum.size(); }

    void add(std::size_t i, double v) noexcept
    {
        const double s = m_sum[i] + v;
        if(std::abs(m_sum[i]) >= std::abs(v))
            m_c[i] += (m_sum[i] - s) + v;
        else
            m_c[i] += (v - s) + m_sum[i];
        m_sum[i] = s;
    }

    [[nodiscard]] Vec value() const
    {
        Vec out(m_sum.size());
        for(std::size_t i = 0; i < out.size(); ++i)
            out[i] = m_sum[i] + m_c[i];
        return out;
    }

private:
    Vec m_sum;
    Vec m_c;
};

/**
 * Composite 5-point Gauss-Legendre rule over `panels` equal panels of
 * [a, b]. The integrand receives (panel index, local coordinate theta in
 * (0, 1), time t) and returns a vector of fixed length `width`.
 */
[[nodiscard]] inline Vec gauss_legendre_5_panels(
    const std::function<Vec(std::size_t panel, double theta, double t)> &integrand, double a, double b,
    std::size_t panels, std::size_t width)
{
    if(!(a < b) || panels < 1)
        throw Error(ErrorKind::InvalidGrid, "gauss_legendre_5 needs a < b and at least one subinterval");
    const double h = (b - a) / static_cast<double>(panels);
    CompensatedSum total(width);
    for(std::size_t p = 0; p < panels; ++p)
    {
        const double left = a + static_cast<double>(p) * h;
        for(std::size_t q = 0; q < 5; ++q)
        {
            const double theta = 0.5 * (1.0 + gl5_nodes[q]);
            const Vec v = integrand(p, theta, left + theta * h);
            if(v.size() != width)
                throw Error(ErrorKind::DimensionMismatch, "integrand returned the wrong length");
            const double w = 0.5 * h * gl5_weights[q];
            for(std::size_t i = 0; i < width; ++i)
            {
                if(!std::isfinite(v[i]))
                    throw Error(ErrorKind::NonFiniteValue, "non-finite integrand value");
                total.add(i, w * v[i]);
            }
        }
    }
    return total.value();
}

/**
 * Composite 5-point Gauss-Legendre rule over `subintervals` equal panels
 * of [a, b] for a vector-valued integrand.
 */
[[nodiscard]] inline Vec gauss_legendre_5(const std::function<Vec(double)> &integrand, double a, double b,
                                          std::size_t subintervals)
{
    if(!(a < b) || subintervals < 1)
        throw Error(ErrorKind::InvalidGrid, "gauss_legendre_5 needs a < b and at least one subinterval");
    const std::size_t width = integrand(a + 0.5 * (b - a) / static_cast<double>(subintervals)).size();
    return gauss_legendre_5_panels([&](std::size_t, double, double t) { return integrand(t); }, a, b,
                                   subintervals, width);
}

// ---------------------------------------------------------------------------
// Finite-difference Jacobian
// ---------------------------------------------------------------------------

/**
 * Central-difference Jacobian. With `step <= 0` the per-component step is
 * sqrt(eps) * (1 + |x_j|).
 */
[[nodiscard]] inline DenseMatrix fd_jacobian(const std::function<Vec(const Vec &)> &fn, const Vec &at,
                                             double step = 0.0)
{
    const double sqrt_eps = std::sqrt(std::numeric_limits<double>::epsilon());
    Vec x = at;
    std::size_t rows = 0;
    DenseMatrix J;
    for(std::size_t j = 0; j < at.size(); ++j)
    {
        const double hj = step > 0.0 ? step : sqrt_eps * (1.0 + std::abs(at[j]));
        // divide by the representable spacing so that linear maps come out exact
        const double xp = at[j] + hj;
        const double xm = at[j] - hj;
        x[j] = xp;
        Vec fp = fn(x);
        x[j] = xm;
        Vec fm = fn(x);
        x[j] = at[j];
        if(!all_finite(fp) || !all_finite(fm))
            throw Error(ErrorKind::NonFiniteValue, "fd_jacobian: non-finite evaluation");
        if(j == 0)
        {
            rows = fp.size();
            J = DenseMatrix(rows, at.size());
        }
        if(fp.size() != rows || fm.size() != rows)
            throw Error(ErrorKind::DimensionMismatch, "fd_jacobian: output length changed");
        const double inv = 1.0 / (xp - xm);
        for(std::size_t i = 0; i < rows; ++i)
            J(i, j) = (fp[i] - fm[i]) * inv;
    }
    if(at.empty())
        J = DenseMatrix(fn(at).size(), 0);
    return J;
}

// ---------------------------------------------------------------------------
// Tensor contraction
// ---------------------------------------------------------------------------

/// Component i of the result is v^T (slice i) v.
[[nodiscard]] inline Vec contract_quadratic(const Tensor3 &T, const Vec &v)
{
    if(T.dim1() != v.size())
        throw Error(ErrorKind::DimensionMismatch, "contract_quadratic: vector length mismatch");
    const std::size_t n = T.dim1();
    Vec out(T.dim0(), 0.0);
    for(std::size_t i = 0; i < T.dim0(); ++i)
    {
        double s = 0.0;
        for(std::size_t j = 0; j < n; ++j)
        {
            if(v[j] == 0.0)
                continue;
            double row = 0.0;
            for(std::size_t k = 0; k < n; ++k)
                row += T(i, j, k) * v[k];
            s += v[j] * row;
        }
        out[i] = s;
    }
    return out;
}

} // namespace adjdae
