/*
 * BDF-1 (implicit Euler) time stepping for semi-explicit DAEs.
 *
 * Each step solves
 *     Y_{n+1} - Y_n - dt f(Y_{n+1}, Z_{n+1}, t_{n+1}) = 0
 *     g(Y_{n+1}, Z_{n+1}, t_{n+1})                    = 0
 * with a damped Newton iteration warm-started from (Y_n, Z_n).
 */
#pragma once

#include "dae.hpp"

#include <cstddef>
#include <string>

namespace adjdae {

struct NewtonSettings
{
    double tol = 1e-12;          // residual inf-norm threshold
    std::size_t max_iters = 50;
    double damping = 0.5;        // backtracking factor
    std::size_t max_halvings = 20;
    /// Keep the factored Jacobian across iterations and steps, refactoring
    /// only when convergence stalls (simplified Newton).
    bool reuse_jacobian = false;
    double pivot_floor = default_pivot_floor;

    void validate() const
    {
        if(!(tol > 0.0) || max_iters < 1 || !(damping > 0.0 && damping < 1.0))
            throw Error(ErrorKind::InvalidParams, "invalid Newton settings");
    }
};

struct ForwardStats
{
    std::size_t newton_iterations = 0;
    std::size_t factorizations = 0;
    double max_residual = 0.0;
};

namespace detail {

class Bdf1Stepper
{
public:
    Bdf1Stepper(const DAEProblem &p, const NewtonSettings &s) : m_p(p), m_s(s) {}

    /// Advances (y, z) from t_n to t = t_n + dt in place.
    void step(Vec &y, Vec &z, double t, double dt, std::size_t step_index, ForwardStats &stats)
    {
        const Vec y_prev = y;
        if(m_have_lu && dt != m_lu_dt)
            m_have_lu = false;

        Vec F = residual(y, z, y_prev, t, dt);
        double norm = inf_norm(F);
        std::size_t iter = 0;
        bool fresh = false;
        while(!(norm <= m_s.tol))
        {
            if(!std::isfinite(norm) || iter >= m_s.max_iters)
                throw Error(ErrorKind::NewtonDiverged, "step " + std::to_string(step_index) + " at t=" +
                                                           std::to_string(t) + ", residual " +
                                                           std::to_string(norm));
            if(!m_s.reuse_jacobian || !m_have_lu)
            {
                factor(y, z, t, dt, stats);
                fresh = true;
            }
            Vec rhs(F.size());
            for(std::size_t i = 0; i < F.size(); ++i)
                rhs[i] = -F[i];
            const Vec delta = m_lu.solve(rhs);
            ++iter;
            ++stats.newton_iterations;

            if(m_s.reuse_jacobian)
            {
                Vec yt = y, zt = z;
                apply(yt, zt, delta, 1.0);
                Vec Ft = residual(yt, zt, y_prev, t, dt);
                const double nt = inf_norm(Ft);
                if(!(nt <= 0.5 * norm) && !fresh)
                {
                    // stale Jacobian: refactor at the current iterate and retry
                    m_have_lu = false;
                    continue;
                }
                y = std::move(yt);
                z = std::move(zt);
                F = std::move(Ft);
                norm = nt;
                fresh = false;
                continue;
            }

            double lambda = 1.0;
            Vec yt, zt, Ft;
            double nt = 0.0;
            for(std::size_t h = 0; h <= m_s.max_halvings; ++h)
            {
                yt = y;
                zt = z;
                apply(yt, zt, delta, lambda);
                Ft = residual(yt, zt, y_prev, t, dt);
                nt = inf_norm(Ft);
                if(nt < norm)
                    break;
                lambda *= m_s.damping;
            }
            if(!(nt < norm))
            {
                // no decrease along the Newton direction: take the full step
                yt = y;
                zt = z;
                apply(yt, zt, delta, 1.0);
                Ft = residual(yt, zt, y_prev, t, dt);
                nt = inf_norm(Ft);
            }
            y = std::move(yt);
            z = std::move(zt);
            F = std::move(Ft);
            norm = nt;
        }
        stats.max_residual = std::max(stats.max_residual, norm);
    }

private:
    Vec residual(const Vec &y, const Vec &z, const Vec &y_prev, double t, double dt) const
    {
        const Vec fv = m_p.eval_f(y, z, t);
        const Vec gv = m_p.eval_g(y, z, t);
        if(fv.size() != m_p.n || gv.size() != m_p.m)
            throw Error(ErrorKind::DimensionMismatch, "f or g returned the wrong length");
        Vec F(m_p.n + m_p.m);
        for(std::size_t i = 0; i < m_p.n; ++i)
            F[i] = y[i] - y_prev[i] - dt * fv[i];
        for(std::size_t i = 0; i < m_p.m; ++i)
            F[m_p.n + i] = gv[i];
        return F;
    }

    void apply(Vec &y, Vec &z, const Vec &delta, double lambda) const
    {
        for(std::size_t i = 0; i < m_p.n; ++i)
            y[i] += lambda * delta[i];
        for(std::size_t i = 0; i < m_p.m; ++i)
            z[i] += lambda * delta[m_p.n + i];
    }

    void factor(const Vec &y, const Vec &z, double t, double dt, ForwardStats &stats)
    {
        const std::size_t n = m_p.n;
        const std::size_t m = m_p.m;
        const DenseMatrix fy = m_p.eval_fy(y, z, t);
        const DenseMatrix fz = m_p.eval_fz(y, z, t);
        const DenseMatrix gy = m_p.eval_gy(y, z, t);
        const DenseMatrix gz = m_p.eval_gz(y, z, t);
        DenseMatrix J(n + m, n + m);
        for(std::size_t i = 0; i < n; ++i)
        {
            for(std::size_t j = 0; j < n; ++j)
                J(i, j) = (i == j ? 1.0 : 0.0) - dt * fy(i, j);
            for(std::size_t j = 0; j < m; ++j)
                J(i, n + j) = -dt * fz(i, j);
        }
        for(std::size_t i = 0; i < m; ++i)
        {
            for(std::size_t j = 0; j < n; ++j)
                J(n + i, j) = gy(i, j);
            for(std::size_t j = 0; j < m; ++j)
                J(n + i, n + j) = gz(i, j);
        }
        m_lu.factor(std::move(J), m_s.pivot_floor);
        m_have_lu = true;
        m_lu_dt = dt;
        ++stats.factorizations;
    }

    const DAEProblem &m_p;
    const NewtonSettings &m_s;
    LU m_lu;
    bool m_have_lu = false;
    double m_lu_dt = 0.0;
};

} // namespace detail

/**
 * Integrates the DAE over `grid` with BDF-1. With `stride` > 1 only every
 * stride-th node is kept and the returned trajectory lives on the
 * correspondingly coarser grid.
 */
[[nodiscard]] inline Trajectory bdf1_solve(const DAEProblem &problem, const TimeGrid &grid,
                                           const NewtonSettings &settings = {}, ForwardStats *stats = nullptr,
                                           std::size_t stride = 1)
{
    settings.validate();
    if(stride < 1 || grid.N() % stride != 0)
        throw Error(ErrorKind::InvalidGrid, "stride must divide the number of steps");
    if(problem.y0.size() != problem.n || problem.z0.size() != problem.m)
        throw Error(ErrorKind::DimensionMismatch, "initial condition does not match problem dimensions");
    ForwardStats local;
    ForwardStats &st = stats ? *stats : local;

    Trajectory traj;
    traj.grid = TimeGrid(grid.t0(), grid.T(), grid.N() / stride);
    traj.Y.reserve(traj.grid.N() + 1);
    traj.Z.reserve(traj.grid.N() + 1);
    traj.Y.push_back(problem.y0);
    traj.Z.push_back(problem.z0);

    detail::Bdf1Stepper stepper(problem, settings);
    Vec y = problem.y0;
    Vec z = problem.z0;
    for(std::size_t k = 1; k <= grid.N(); ++k)
    {
        stepper.step(y, z, grid.node(k), grid.dt(), k, st);
        if(k % stride == 0)
        {
            traj.Y.push_back(y);
            traj.Z.push_back(z);
        }
    }
    return traj;
}

} // namespace adjdae
