/*
 * Adjoint problems, solved backward in time with BDF-1 on an r-times
 * refined grid.
 *
 * DAE path: the linear adjoint DAE
 *     -phi_y' = f_y^T phi_y + g_y^T phi_z + psi_y
 *           0 = f_z^T phi_y + g_z^T phi_z + psi_z
 * ODE path: the adjoint of the index-reduced ODE, -nu' = A^T nu + psi with
 *     A = [[f_y, f_z], [h_y, h_z]].
 *
 * All Jacobians are evaluated at the piecewise-linear numerical solution.
 */
#pragma once

#include "dae.hpp"
#include "reduction.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace adjdae {

enum class AdjointPath { DAE, ODE };

[[nodiscard]] inline const char *to_string(AdjointPath p) noexcept
{
    return p == AdjointPath::DAE ? "adjoint-dae" : "adjoint-ode";
}

/// Which error representation (and hence which terminal condition) applies.
enum class Representation {
    Index1Cumulative,
    Index1Terminal,             // general zeta
    Index1TerminalDifferential, // zeta_z = 0
    Index2Cumulative,
    Index2Terminal,             // general zeta
    Index2TerminalDifferential, // zeta_z = 0
    OdeCumulative,
    OdeTerminal,
};

[[nodiscard]] inline const char *to_string(Representation r) noexcept
{
    switch(r)
    {
    case Representation::Index1Cumulative: return "index1-cumulative";
    case Representation::Index1Terminal: return "index1-terminal";
    case Representation::Index1TerminalDifferential: return "index1-terminal-differential";
    case Representation::Index2Cumulative: return "index2-cumulative";
    case Representation::Index2Terminal: return "index2-terminal";
    case Representation::Index2TerminalDifferential: return "index2-terminal-differential";
    case Representation::OdeCumulative: return "ode-cumulative";
    case Representation::OdeTerminal: return "ode-terminal";
    }
    return "unknown";
}

[[nodiscard]] inline Representation select_representation(const DAEProblem &p, const QoISpec &q, AdjointPath path)
{
    const bool cumulative = q.kind == QoIKind::Cumulative;
    if(path == AdjointPath::ODE)
        return cumulative ? Representation::OdeCumulative : Representation::OdeTerminal;
    if(p.index == DaeIndex::Index1)
    {
        if(cumulative)
            return Representation::Index1Cumulative;
        return q.zeta_z_is_zero() ? Representation::Index1TerminalDifferential : Representation::Index1Terminal;
    }
    if(cumulative)
        return Representation::Index2Cumulative;
    return q.zeta_z_is_zero() ? Representation::Index2TerminalDifferential : Representation::Index2Terminal;
}

// ---------------------------------------------------------------------------
// Linearization
// ---------------------------------------------------------------------------

struct LinearizedOps
{
    DenseMatrix fy; // n x n
    DenseMatrix fz; // n x m
    DenseMatrix gy; // m x n
    DenseMatrix gz; // m x m
    DenseMatrix hy; // m x n, ODE path only
    DenseMatrix hz; // m x m, ODE path only
};

/// Jacobians at a given state; h_y, h_z by central differences of h.
[[nodiscard]] inline LinearizedOps linearized_ops_at_state(const DAEProblem &p, const Vec &y, const Vec &z, double t,
                                                           AdjointPath path)
{
    LinearizedOps ops;
    ops.fy = p.eval_fy(y, z, t);
    ops.fz = p.eval_fz(y, z, t);
    ops.gy = p.eval_gy(y, z, t);
    ops.gz = p.eval_gz(y, z, t);
    if(path == AdjointPath::ODE)
    {
        Vec x = y;
        x.insert(x.end(), z.begin(), z.end());
        const std::size_t n = p.n;
        const DenseMatrix H = fd_jacobian(
            [&](const Vec &xx) {
                Vec yy(xx.begin(), xx.begin() + static_cast<std::ptrdiff_t>(n));
                Vec zz(xx.begin() + static_cast<std::ptrdiff_t>(n), xx.end());
                return reduced_h(p, yy, zz, t, p.eval_f(yy, zz, t));
            },
            x);
        ops.hy = DenseMatrix(p.m, p.n);
        ops.hz = DenseMatrix(p.m, p.m);
        for(std::size_t i = 0; i < p.m; ++i)
        {
            for(std::size_t j = 0; j < p.n; ++j)
                ops.hy(i, j) = H(i, j);
            for(std::size_t j = 0; j < p.m; ++j)
                ops.hz(i, j) = H(i, p.n + j);
        }
    }
    return ops;
}

[[nodiscard]] inline LinearizedOps linearized_ops_at(const DAEProblem &p, const Trajectory &traj, double t,
                                                     AdjointPath path)
{
    const State s = interpolate(traj, t);
    return linearized_ops_at_state(p, s.y, s.z, t, path);
}

/// P = I - f_z (g_y f_z)^{-1} g_y
[[nodiscard]] inline DenseMatrix projector(const LinearizedOps &ops)
{
    const DenseMatrix gyfz = matmul(ops.gy, ops.fz);
    const DenseMatrix X = LU(gyfz).solve(ops.gy); // (g_y f_z)^{-1} g_y
    return DenseMatrix::identity(ops.fy.rows()) - matmul(ops.fz, X);
}

/**
 * d(g_y^T)/dt at T along the numerical solution (n x m). Uses the chain
 * rule g_yy Y' + g_yt with the last-interval slope when the problem supplies
 * g_yy, and a one-sided difference over `delta` otherwise.
 */
[[nodiscard]] inline DenseMatrix dgyT_dt(const DAEProblem &p, const Trajectory &traj, double delta)
{
    if(traj.size() < 2)
        throw Error(ErrorKind::InvalidGrid, "trajectory needs at least two nodes");
    const double T = traj.grid.T();
    const Vec &yT = traj.Y.back();
    const Vec &zT = traj.Z.back();
    DenseMatrix out(p.n, p.m);
    if(p.gyy)
    {
        const Vec ydot = piecewise_derivative(traj, T).y;
        const Tensor3 H = p.eval_gyy(yT, zT, T);
        const DenseMatrix gyt = p.eval_gyt(yT, zT, T);
        for(std::size_t i = 0; i < p.m; ++i)
            for(std::size_t j = 0; j < p.n; ++j)
            {
                double s = gyt(i, j);
                for(std::size_t k = 0; k < p.n; ++k)
                    s += H(i, j, k) * ydot[k];
                out(j, i) = s;
            }
        return out;
    }
    const State prev = interpolate(traj, T - delta);
    const DenseMatrix a = p.eval_gy(yT, zT, T);
    const DenseMatrix b = p.eval_gy(prev.y, prev.z, T - delta);
    for(std::size_t i = 0; i < p.m; ++i)
        for(std::size_t j = 0; j < p.n; ++j)
            out(j, i) = (a(i, j) - b(i, j)) / delta;
    return out;
}

/// dg(Y)/dt at T: g_y Y' + g_t with the last-interval slope.
[[nodiscard]] inline Vec dg_dt_at_end(const DAEProblem &p, const Trajectory &traj)
{
    const double T = traj.grid.T();
    const Vec ydot = piecewise_derivative(traj, T).y;
    return matvec(p.eval_gy(traj.Y.back(), traj.Z.back(), T), ydot) +
           p.eval_gt(traj.Y.back(), traj.Z.back(), T);
}

// ---------------------------------------------------------------------------
// Terminal conditions
// ---------------------------------------------------------------------------

struct TerminalCondition
{
    Representation representation;
    Vec phi_y;             // phi_y(T), or nu(T) = [nu_y; nu_z] on the ODE path
    std::optional<Vec> phi_z; // phi_z(T) when it follows from the algebraic adjoint equation
};

/**
 * Adjoint value at T for the given QoI, index and path. `delta` is the step
 * for the one-sided d(g_y^T)/dt fallback (normally the refined step).
 */
[[nodiscard]] inline TerminalCondition terminal_condition(const DAEProblem &p, const QoISpec &q,
                                                          const LinearizedOps &ops, const Trajectory &traj,
                                                          AdjointPath path, double delta)
{
    q.validate(p.n, p.m);
    const double T = traj.grid.T();
    TerminalCondition tc{select_representation(p, q, path), {}, std::nullopt};
    const std::size_t n = p.n, m = p.m;

    switch(tc.representation)
    {
    case Representation::OdeCumulative:
        tc.phi_y.assign(n + m, 0.0);
        return tc;
    case Representation::OdeTerminal:
        tc.phi_y = q.zeta_y;
        tc.phi_y.insert(tc.phi_y.end(), q.zeta_z.begin(), q.zeta_z.end());
        return tc;
    case Representation::Index1Cumulative:
    {
        tc.phi_y.assign(n, 0.0);
        Vec rhs = q.psi_z(T);
        for(double &v : rhs)
            v = -v;
        tc.phi_z = lu_solve(ops.gz.transpose(), rhs);
        return tc;
    }
    case Representation::Index1Terminal:
    case Representation::Index1TerminalDifferential:
    {
        // phi_y(T) = zeta_y - g_y^T (g_z^T)^{-1} zeta_z
        const LU gzT(ops.gz.transpose());
        tc.phi_y = q.zeta_y - matvec_t(ops.gy, gzT.solve(q.zeta_z));
        Vec rhs = matvec_t(ops.fz, tc.phi_y);
        for(double &v : rhs)
            v = -v;
        tc.phi_z = gzT.solve(rhs);
        return tc;
    }
    case Representation::Index2Cumulative:
    {
        // phi_y(T) = -g_y^T (f_z^T g_y^T)^{-1} psi_z(T)
        const DenseMatrix A = matmul(ops.fz.transpose(), ops.gy.transpose());
        Vec w = lu_solve(A, q.psi_z(T));
        tc.phi_y = matvec_t(ops.gy, w);
        for(double &v : tc.phi_y)
            v = -v;
        return tc;
    }
    case Representation::Index2Terminal:
    case Representation::Index2TerminalDifferential:
    {
        const DenseMatrix A = matmul(ops.fz.transpose(), ops.gy.transpose());
        const LU Alu(A);
        // w = zeta_y - f_y^T v - (d g_y^T/dt) A^{-1} zeta_z,  v = g_y^T A^{-1} zeta_z
        Vec w = q.zeta_y;
        if(tc.representation == Representation::Index2Terminal)
        {
            const Vec a = Alu.solve(q.zeta_z);
            const Vec v = matvec_t(ops.gy, a);
            w = w - matvec_t(ops.fy, v);
            w = w - matvec(dgyT_dt(p, traj, delta), a);
        }
        // P^T w = w - g_y^T A^{-1} f_z^T w
        tc.phi_y = w - matvec_t(ops.gy, Alu.solve(matvec_t(ops.fz, w)));
        return tc;
    }
    }
    return tc;
}

// ---------------------------------------------------------------------------
// Backward solve
// ---------------------------------------------------------------------------

struct AdjointSolution
{
    AdjointPath path = AdjointPath::DAE;
    Representation representation = Representation::Index1Cumulative;
    TimeGrid grid; // refined grid
    std::size_t r = 1;
    std::vector<Vec> phi_y; // DAE: phi_y; ODE: nu_y
    std::vector<Vec> phi_z; // DAE: phi_z; ODE: nu_z
};

[[nodiscard]] inline AdjointSolution solve_adjoint_backward(const DAEProblem &p, const Trajectory &traj,
                                                            const QoISpec &q, AdjointPath path, std::size_t r)
{
    if(r < 1)
        throw Error(ErrorKind::InvalidParams, "refinement factor must be >= 1");
    if(path == AdjointPath::ODE && !p.supports_ode_path)
        throw Error(ErrorKind::Unsupported, "adjoint ODE path is not offered for problem " + p.name);
    q.validate(p.n, p.m);
    const std::size_t n = p.n, m = p.m, nm = n + m;

    AdjointSolution sol;
    sol.path = path;
    sol.r = r;
    sol.grid = traj.grid.refined(r);
    const std::size_t M = sol.grid.N();
    const double h = sol.grid.dt();
    sol.phi_y.assign(M + 1, Vec());
    sol.phi_z.assign(M + 1, Vec());

    const double T = sol.grid.T();
    const bool cumulative = q.kind == QoIKind::Cumulative;
    const LinearizedOps opsT = linearized_ops_at(p, traj, T, path);
    TerminalCondition tc = terminal_condition(p, q, opsT, traj, path, h);
    sol.representation = tc.representation;

    // nodal state of the trajectory at refined node j
    auto state_at = [&](std::size_t j) {
        const std::size_t k = j / r;
        const std::size_t rem = j % r;
        if(rem == 0)
            return State{traj.Y[k], traj.Z[k]};
        const double theta = static_cast<double>(rem) / static_cast<double>(r);
        return State{lerp(traj.Y[k], traj.Y[k + 1], theta), lerp(traj.Z[k], traj.Z[k + 1], theta)};
    };

    if(path == AdjointPath::ODE)
    {
        Vec nu = tc.phi_y;
        sol.phi_y[M] = Vec(nu.begin(), nu.begin() + static_cast<std::ptrdiff_t>(n));
        sol.phi_z[M] = Vec(nu.begin() + static_cast<std::ptrdiff_t>(n), nu.end());
        for(std::size_t j = M; j-- > 0;)
        {
            const double t = sol.grid.node(j);
            const State s = state_at(j);
            const LinearizedOps ops = linearized_ops_at_state(p, s.y, s.z, t, path);
            // K = I - h A^T
            DenseMatrix K(nm, nm);
            for(std::size_t a = 0; a < nm; ++a)
                K(a, a) = 1.0;
            for(std::size_t i = 0; i < n; ++i)
            {
                for(std::size_t k = 0; k < n; ++k)
                    K(k, i) -= h * ops.fy(i, k);
                for(std::size_t k = 0; k < m; ++k)
                    K(n + k, i) -= h * ops.fz(i, k);
            }
            for(std::size_t i = 0; i < m; ++i)
            {
                for(std::size_t k = 0; k < n; ++k)
                    K(k, n + i) -= h * ops.hy(i, k);
                for(std::size_t k = 0; k < m; ++k)
                    K(n + k, n + i) -= h * ops.hz(i, k);
            }
            Vec rhs = nu;
            if(cumulative)
            {
                const Vec py = q.psi_y(t), pz = q.psi_z(t);
                for(std::size_t i = 0; i < n; ++i)
                    rhs[i] += h * py[i];
                for(std::size_t i = 0; i < m; ++i)
                    rhs[n + i] += h * pz[i];
            }
            try
            {
                nu = lu_solve(K, rhs);
            }
            catch(const Error &e)
            {
                throw Error(e.kind(), std::string("adjoint ODE step at t=") + std::to_string(t) + ": " + e.what());
            }
            sol.phi_y[j] = Vec(nu.begin(), nu.begin() + static_cast<std::ptrdiff_t>(n));
            sol.phi_z[j] = Vec(nu.begin() + static_cast<std::ptrdiff_t>(n), nu.end());
        }
        return sol;
    }

    sol.phi_y[M] = tc.phi_y;
    Vec phi = tc.phi_y;
    for(std::size_t j = M; j-- > 0;)
    {
        const double t = sol.grid.node(j);
        const State s = state_at(j);
        const LinearizedOps ops = linearized_ops_at_state(p, s.y, s.z, t, path);
        // [[I - h f_y^T, -h g_y^T], [f_z^T, g_z^T]]
        DenseMatrix K(nm, nm);
        for(std::size_t a = 0; a < n; ++a)
            K(a, a) = 1.0;
        for(std::size_t i = 0; i < n; ++i)
        {
            for(std::size_t k = 0; k < n; ++k)
                K(k, i) -= h * ops.fy(i, k);
            for(std::size_t k = 0; k < m; ++k)
                K(n + k, i) = ops.fz(i, k);
        }
        for(std::size_t i = 0; i < m; ++i)
        {
            for(std::size_t k = 0; k < n; ++k)
                K(k, n + i) = -h * ops.gy(i, k);
            for(std::size_t k = 0; k < m; ++k)
                K(n + k, n + i) = ops.gz(i, k);
        }
        Vec rhs(nm, 0.0);
        for(std::size_t i = 0; i < n; ++i)
            rhs[i] = phi[i];
        if(cumulative)
        {
            const Vec py = q.psi_y(t), pz = q.psi_z(t);
            for(std::size_t i = 0; i < n; ++i)
                rhs[i] += h * py[i];
            for(std::size_t i = 0; i < m; ++i)
                rhs[n + i] = -pz[i];
        }
        Vec x;
        try
        {
            x = lu_solve(K, rhs);
        }
        catch(const Error &e)
        {
            throw Error(e.kind(), std::string("adjoint DAE step at t=") + std::to_string(t) + ": " + e.what());
        }
        phi.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
        sol.phi_y[j] = phi;
        sol.phi_z[j] = Vec(x.begin() + static_cast<std::ptrdiff_t>(n), x.end());
    }
    // phi_z(T): from the algebraic adjoint equation (index 1) or carried over
    // from the first backward step (index 2, where g_z = 0 leaves it free).
    sol.phi_z[M] = tc.phi_z ? *tc.phi_z : sol.phi_z[M - 1];
    return sol;
}

/// max over refined nodes of |f_z^T phi_y + g_z^T phi_z + psi_z|_inf (DAE path).
[[nodiscard]] inline double algebraic_adjoint_residual(const DAEProblem &p, const Trajectory &traj,
                                                       const QoISpec &q, const AdjointSolution &adj)
{
    if(adj.path != AdjointPath::DAE)
        throw Error(ErrorKind::PathMismatch, "algebraic adjoint residual is defined for the DAE path");
    double worst = 0.0;
    for(std::size_t j = 0; j <= adj.grid.N(); ++j)
    {
        const double t = adj.grid.node(j);
        const LinearizedOps ops = linearized_ops_at(p, traj, t, AdjointPath::DAE);
        Vec res = matvec_t(ops.fz, adj.phi_y[j]) + matvec_t(ops.gz, adj.phi_z[j]);
        if(q.kind == QoIKind::Cumulative)
            res = res + q.psi_z(t);
        worst = std::max(worst, inf_norm(res));
    }
    return worst;
}

} // namespace adjdae
