/*
 * Data model for semi-explicit DAEs
 *
 *     y' = f(y, z, t),   0 = g(y, z, t)
 *
 * with y in R^n (differential) and z in R^m (algebraic). For index-2
 * (Hessenberg) problems g does not depend on z.
 */
#pragma once

#include "numerics.hpp"

#include <cmath>
#include <limits>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace adjdae {

enum class DaeIndex { Index1, Index2 };

/// Where reference solutions for effectivity ratios come from.
enum class ReferenceBackend { Auto, Analytic, RkAdaptive, FineBdfRichardson };

[[nodiscard]] inline const char *to_string(DaeIndex idx) noexcept
{
    return idx == DaeIndex::Index1 ? "index-1" : "index-2";
}

struct State
{
    Vec y;
    Vec z;
};

using VecFn = std::function<Vec(const Vec &y, const Vec &z, double t)>;
using MatFn = std::function<DenseMatrix(const Vec &y, const Vec &z, double t)>;
using TensorFn = std::function<Tensor3(const Vec &y, const Vec &z, double t)>;

/**
 * A semi-explicit DAE with optional derivative oracles.
 *
 * Any oracle left empty is replaced by a finite-difference approximation
 * through the `eval_*` accessors, so callers never touch the raw members
 * directly except to populate them.
 */
struct DAEProblem
{
    std::string name;
    std::size_t n = 0;
    std::size_t m = 0;
    DaeIndex index = DaeIndex::Index1;

    VecFn f;
    VecFn g;

    MatFn fy;     // n x n
    MatFn fz;     // n x m
    MatFn gy;     // m x n
    MatFn gz;     // m x m (zero for index 2)
    VecFn ft;     // n
    VecFn gt;     // m
    TensorFn gyy; // (m, n, n)
    MatFn gyt;    // m x n, d(g_y)/dt
    VecFn gtt;    // m

    Vec y0;
    Vec z0;
    double t0 = 0.0;

    /// Exact solution, when one is known.
    std::function<State(double t)> analytic;

    /// Human-readable parameter listing for `describe`.
    std::map<std::string, double> params;

    /// Backend chosen when a run asks for `Auto`.
    ReferenceBackend preferred_reference = ReferenceBackend::RkAdaptive;
    /// Adjoint grid refinement factor used unless overridden.
    std::size_t default_refinement = 4;
    /// Whether the index-reduced adjoint ODE is offered for this problem.
    bool supports_ode_path = true;

    [[nodiscard]] Vec eval_f(const Vec &y, const Vec &z, double t) const { return f(y, z, t); }
    [[nodiscard]] Vec eval_g(const Vec &y, const Vec &z, double t) const { return g(y, z, t); }

    [[nodiscard]] DenseMatrix eval_fy(const Vec &y, const Vec &z, double t) const
    {
        if(fy)
            return fy(y, z, t);
        return fd_jacobian([&](const Vec &yy) { return f(yy, z, t); }, y);
    }

    [[nodiscard]] DenseMatrix eval_fz(const Vec &y, const Vec &z, double t) const
    {
        if(fz)
            return fz(y, z, t);
        return fd_jacobian([&](const Vec &zz) { return f(y, zz, t); }, z);
    }

    [[nodiscard]] DenseMatrix eval_gy(const Vec &y, const Vec &z, double t) const
    {
        if(gy)
            return gy(y, z, t);
        return fd_jacobian([&](const Vec &yy) { return g(yy, z, t); }, y);
    }

    [[nodiscard]] DenseMatrix eval_gz(const Vec &y, const Vec &z, double t) const
    {
        if(index == DaeIndex::Index2)
            return DenseMatrix(m, m);
        if(gz)
            return gz(y, z, t);
        return fd_jacobian([&](const Vec &zz) { return g(y, zz, t); }, z);
    }

    [[nodiscard]] Vec eval_ft(const Vec &y, const Vec &z, double t) const
    {
        if(ft)
            return ft(y, z, t);
        return time_derivative([&](double s) { return f(y, z, s); }, t);
    }

    [[nodiscard]] Vec eval_gt(const Vec &y, const Vec &z, double t) const
    {
        if(gt)
            return gt(y, z, t);
        return time_derivative([&](double s) { return g(y, z, s); }, t);
    }

    [[nodiscard]] Tensor3 eval_gyy(const Vec &y, const Vec &z, double t) const
    {
        if(gyy)
            return gyy(y, z, t);
        Tensor3 T(m, n);
        if(gy)
        {
            DenseMatrix J = fd_jacobian([&](const Vec &yy) { return gy(yy, z, t).data(); }, y);
            // Row (i*n + j) of J holds d(g_y)_{ij}/dy_k.
            for(std::size_t i = 0; i < m; ++i)
                for(std::size_t j = 0; j < n; ++j)
                    for(std::size_t k = 0; k < n; ++k)
                        T(i, j, k) = J(i * n + j, k);
            return T;
        }
        // Nested first differences would lose all digits; take second
        // differences of g directly with an eps^(1/4) step.
        const double q = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
        Vec yy = y;
        for(std::size_t j = 0; j < n; ++j)
            for(std::size_t k = j; k < n; ++k)
            {
                const double hj = q * (1.0 + std::abs(y[j]));
                const double hk = q * (1.0 + std::abs(y[k]));
                auto at = [&](double sj, double sk) {
                    yy[j] += sj * hj;
                    yy[k] += sk * hk;
                    Vec v = g(yy, z, t);
                    yy[j] = y[j];
                    yy[k] = y[k];
                    return v;
                };
                const Vec pp = at(1, 1), pm = at(1, -1), mp = at(-1, 1), mm = at(-1, -1);
                for(std::size_t i = 0; i < m; ++i)
                {
                    const double d = (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * hj * hk);
                    T(i, j, k) = d;
                    T(i, k, j) = d;
                }
            }
        return T;
    }

    [[nodiscard]] DenseMatrix eval_gyt(const Vec &y, const Vec &z, double t) const
    {
        if(gyt)
            return gyt(y, z, t);
        Vec d = time_derivative([&](double s) { return eval_gy(y, z, s).data(); }, t);
        return DenseMatrix(m, n, std::move(d));
    }

    [[nodiscard]] Vec eval_gtt(const Vec &y, const Vec &z, double t) const
    {
        if(gtt)
            return gtt(y, z, t);
        return time_derivative([&](double s) { return eval_gt(y, z, s); }, t);
    }

    [[nodiscard]] bool has_analytic() const noexcept { return static_cast<bool>(analytic); }

private:
    static Vec time_derivative(const std::function<Vec(double)> &fn, double t)
    {
        const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + std::abs(t));
        Vec p = fn(t + h);
        Vec q = fn(t - h);
        Vec d(p.size());
        for(std::size_t i = 0; i < p.size(); ++i)
            d[i] = (p[i] - q[i]) / (2.0 * h);
        return d;
    }
};

// ---------------------------------------------------------------------------
// Time grid and trajectory
// ---------------------------------------------------------------------------

/// Uniform grid t_k = t0 + k*dt, k = 0..N, with t_N == T exactly.
class TimeGrid
{
public:
    TimeGrid() = default;
    TimeGrid(double t0, double T, std::size_t N) : m_t0(t0), m_T(T), m_N(N)
    {
        if(!(T > t0) || N < 1)
            throw Error(ErrorKind::InvalidGrid, "time grid needs T > t0 and N >= 1");
        m_dt = (T - t0) / static_cast<double>(N);
    }

    /// Builds the grid for step dt; dt must divide T - t0 to 1e-12 relative.
    [[nodiscard]] static TimeGrid from_step(double t0, double T, double dt)
    {
        if(!(dt > 0.0) || !(T > t0))
            throw Error(ErrorKind::InvalidGrid, "need dt > 0 and T > t0");
        const double ratio = (T - t0) / dt;
        const double N = std::round(ratio);
        if(N < 1.0 || std::abs(ratio - N) > 1e-12 * std::max(1.0, ratio))
            throw Error(ErrorKind::InvalidGrid, "dt does not divide the interval");
        return TimeGrid(t0, T, static_cast<std::size_t>(N));
    }

    [[nodiscard]] double t0() const noexcept { return m_t0; }
    [[nodiscard]] double T() const noexcept { return m_T; }
    [[nodiscard]] std::size_t N() const noexcept { return m_N; }
    [[nodiscard]] double dt() const noexcept { return m_dt; }

    [[nodiscard]] double node(std::size_t k) const noexcept
    {
        return k == m_N ? m_T : m_t0 + static_cast<double>(k) * m_dt;
    }

    [[nodiscard]] TimeGrid refined(std::size_t r) const { return TimeGrid(m_t0, m_T, m_N * r); }

    /**
     * Locates t: returns (k, theta) with t = t_k + theta*dt, theta in [0, 1).
     * Times within a few ulps of a node snap to it (theta = 0), except T
     * which reports (N-1, 1).
     */
    [[nodiscard]] std::pair<std::size_t, double> locate(double t) const
    {
        const double slack = 1e-12 * std::max(1.0, std::abs(m_T));
        if(t < m_t0 - slack || t > m_T + slack)
            throw Error(ErrorKind::OutOfDomain, "time " + std::to_string(t) + " outside grid");
        const double s = (t - m_t0) / m_dt;
        double k = std::round(s);
        if(std::abs(s - k) <= 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(s)))
        {
            k = std::clamp(k, 0.0, static_cast<double>(m_N));
            const auto kk = static_cast<std::size_t>(k);
            if(kk == m_N)
                return {m_N - 1, 1.0};
            return {kk, 0.0};
        }
        double fl = std::floor(s);
        fl = std::clamp(fl, 0.0, static_cast<double>(m_N - 1));
        const auto kk = static_cast<std::size_t>(fl);
        return {kk, std::clamp(s - fl, 0.0, 1.0)};
    }

private:
    double m_t0 = 0.0;
    double m_T = 1.0;
    std::size_t m_N = 1;
    double m_dt = 1.0;
};

/// Nodal numerical solution, piecewise linear in between.
struct Trajectory
{
    TimeGrid grid;
    std::vector<Vec> Y;
    std::vector<Vec> Z;

    [[nodiscard]] std::size_t size() const noexcept { return Y.size(); }
};

/// Piecewise-linear evaluation; exact at nodes.
[[nodiscard]] inline State interpolate(const Trajectory &traj, double t)
{
    auto [k, theta] = traj.grid.locate(t);
    if(theta == 0.0)
        return {traj.Y[k], traj.Z[k]};
    if(theta == 1.0)
        return {traj.Y[k + 1], traj.Z[k + 1]};
    return {lerp(traj.Y[k], traj.Y[k + 1], theta), lerp(traj.Z[k], traj.Z[k + 1], theta)};
}

/// Index of the interval whose slope defines the derivative at t.
[[nodiscard]] inline std::size_t slope_interval(const TimeGrid &grid, double t)
{
    auto [k, theta] = grid.locate(t);
    if(theta == 0.0 && k > 0)
        return k - 1;
    return k;
}

/// Slope of the interpolant; left slope at interior nodes, right slope at t0.
[[nodiscard]] inline State piecewise_derivative(const Trajectory &traj, double t)
{
    const std::size_t k = slope_interval(traj.grid, t);
    const double inv = 1.0 / traj.grid.dt();
    return {inv * (traj.Y[k + 1] - traj.Y[k]), inv * (traj.Z[k + 1] - traj.Z[k])};
}

// ---------------------------------------------------------------------------
// Quantities of interest
// ---------------------------------------------------------------------------

enum class QoIKind { Cumulative, Terminal };

/**
 * Cumulative: Q(x) = int_0^T (y, psi_y) + (z, psi_z) dt.
 * Terminal:   Q(x) = (y(T), zeta_y) + (z(T), zeta_z).
 */
struct QoISpec
{
    QoIKind kind = QoIKind::Cumulative;
    std::function<Vec(double)> psi_y;
    std::function<Vec(double)> psi_z;
    Vec zeta_y;
    Vec zeta_z;

    [[nodiscard]] static QoISpec cumulative(Vec psi_y_const, Vec psi_z_const)
    {
        QoISpec q;
        q.kind = QoIKind::Cumulative;
        q.psi_y = [v = std::move(psi_y_const)](double) { return v; };
        q.psi_z = [v = std::move(psi_z_const)](double) { return v; };
        return q;
    }

    [[nodiscard]] static QoISpec terminal(Vec zeta_y, Vec zeta_z)
    {
        QoISpec q;
        q.kind = QoIKind::Terminal;
        q.zeta_y = std::move(zeta_y);
        q.zeta_z = std::move(zeta_z);
        return q;
    }

    [[nodiscard]] bool zeta_z_is_zero() const noexcept
    {
        return std::all_of(zeta_z.begin(), zeta_z.end(), [](double v) { return v == 0.0; });
    }

    /// Throws DimensionMismatch unless the QoI fits an (n, m) problem.
    void validate(std::size_t n, std::size_t m) const
    {
        if(kind == QoIKind::Terminal)
        {
            if(zeta_y.size() != n || zeta_z.size() != m)
                throw Error(ErrorKind::DimensionMismatch, "terminal QoI does not match problem dimensions");
        }
        else
        {
            if(!psi_y || !psi_z)
                throw Error(ErrorKind::InvalidParams, "cumulative QoI needs psi_y and psi_z");
            if(psi_y(0.0).size() != n || psi_z(0.0).size() != m)
                throw Error(ErrorKind::DimensionMismatch, "cumulative QoI does not match problem dimensions");
        }
    }
};

// ---------------------------------------------------------------------------
// Consistency diagnostics
// ---------------------------------------------------------------------------

struct ConsistencyReport
{
    double constraint_residual = 0.0; // |g(y0, z0, t0)|_inf
    double hidden_residual = 0.0;     // |g_y f + g_t|_inf, index 2 only
    bool index_condition = true;      // g_z (index 1) or g_y f_z (index 2) nonsingular
    bool pass = false;
};

[[nodiscard]] inline ConsistencyReport check_consistency(const DAEProblem &p, double tol = 1e-10)
{
    ConsistencyReport rep;
    rep.constraint_residual = inf_norm(p.eval_g(p.y0, p.z0, p.t0));
    try
    {
        if(p.index == DaeIndex::Index1)
        {
            LU lu(p.eval_gz(p.y0, p.z0, p.t0));
        }
        else
        {
            const DenseMatrix gy = p.eval_gy(p.y0, p.z0, p.t0);
            LU lu(matmul(gy, p.eval_fz(p.y0, p.z0, p.t0)));
            Vec hidden = matvec(gy, p.eval_f(p.y0, p.z0, p.t0)) + p.eval_gt(p.y0, p.z0, p.t0);
            rep.hidden_residual = inf_norm(hidden);
        }
    }
    catch(const Error &)
    {
        rep.index_condition = false;
    }
    rep.pass = rep.index_condition && rep.constraint_residual <= tol && rep.hidden_residual <= tol;
    return rep;
}

} // namespace adjdae
