/*
 * Index reduction to the underlying ODE  y' = f(y, z, t),  z' = h(y, z, t)
 * and an adaptive Dormand-Prince 5(4) integrator used for reference
 * solutions.
 */
#pragma once

#include "dae.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace adjdae {

/// Right-hand side h of the algebraic variables' ODE.
[[nodiscard]] inline Vec reduced_h(const DAEProblem &p, const Vec &y, const Vec &z, double t, const Vec &fv)
{
    const DenseMatrix gy = p.eval_gy(y, z, t);
    if(p.index == DaeIndex::Index1)
    {
        // h = -g_z^{-1} (g_y f + g_t)
        Vec rhs = matvec(gy, fv) + p.eval_gt(y, z, t);
        for(double &v : rhs)
            v = -v;
        return lu_solve(p.eval_gz(y, z, t), rhs);
    }
    // h = -(g_y f_z)^{-1} (f^T g_yy f + g_y f_y f + 2 g_yt f + g_y f_t + g_tt)
    const DenseMatrix fy = p.eval_fy(y, z, t);
    const DenseMatrix fz = p.eval_fz(y, z, t);
    Vec rhs = contract_quadratic(p.eval_gyy(y, z, t), fv);
    rhs = rhs + matvec(gy, matvec(fy, fv));
    rhs = rhs + 2.0 * matvec(p.eval_gyt(y, z, t), fv);
    rhs = rhs + matvec(gy, p.eval_ft(y, z, t));
    rhs = rhs + p.eval_gtt(y, z, t);
    for(double &v : rhs)
        v = -v;
    return lu_solve(matmul(gy, fz), rhs);
}

/// Returns (f, h) of the index-reduced ODE.
[[nodiscard]] inline std::pair<Vec, Vec> reduced_rhs(const DAEProblem &p, const Vec &y, const Vec &z, double t)
{
    Vec fv = p.eval_f(y, z, t);
    Vec h = reduced_h(p, y, z, t, fv);
    return {std::move(fv), std::move(h)};
}

/// The underlying ODE on the stacked state x = [y; z].
class ReducedODE
{
public:
    explicit ReducedODE(const DAEProblem &p) : m_p(&p) {}

    [[nodiscard]] const DAEProblem &problem() const noexcept { return *m_p; }
    [[nodiscard]] std::size_t dimension() const noexcept { return m_p->n + m_p->m; }

    [[nodiscard]] Vec rhs(const Vec &x, double t) const
    {
        auto [y, z] = split(x);
        auto [fv, h] = reduced_rhs(*m_p, y, z, t);
        fv.insert(fv.end(), h.begin(), h.end());
        return fv;
    }

    /// Largest invariant violation: |g|, plus |g_y f + g_t| for index 2.
    [[nodiscard]] double invariant_drift(const Vec &x, double t) const
    {
        auto [y, z] = split(x);
        double d = inf_norm(m_p->eval_g(y, z, t));
        if(m_p->index == DaeIndex::Index2)
        {
            Vec hidden = matvec(m_p->eval_gy(y, z, t), m_p->eval_f(y, z, t)) + m_p->eval_gt(y, z, t);
            d = std::max(d, inf_norm(hidden));
        }
        return d;
    }

    [[nodiscard]] std::pair<Vec, Vec> split(const Vec &x) const
    {
        const auto n = static_cast<std::ptrdiff_t>(m_p->n);
        return {Vec(x.begin(), x.begin() + n), Vec(x.begin() + n, x.end())};
    }

private:
    const DAEProblem *m_p;
};

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4)
// ---------------------------------------------------------------------------

struct RkSettings
{
    double atol = 1e-12;
    double rtol = 1e-10;
    double safety = 0.9;
    double alpha = 0.17; // PI controller exponents
    double beta = 0.04;
    double min_factor = 0.2;
    double max_factor = 10.0;
    std::size_t max_steps = 20'000'000;
    double first_step = 0.0; // 0 selects automatically
};

/// Accepted steps of an RK solve with 4th-order continuous extension.
class DenseRkSolution
{
public:
    [[nodiscard]] double t_begin() const noexcept { return m_t.front(); }
    [[nodiscard]] double t_end() const noexcept { return m_t_end; }
    [[nodiscard]] std::size_t step_count() const noexcept { return m_t.size(); }
    [[nodiscard]] double max_drift() const noexcept { return m_max_drift; }
    [[nodiscard]] const Vec &final_state() const noexcept { return m_x_end; }

    [[nodiscard]] Vec operator()(double t) const
    {
        if(m_t.empty())
            throw Error(ErrorKind::OutOfDomain, "empty RK solution");
        const double slack = 1e-12 * std::max(1.0, std::abs(m_t_end));
        if(t < t_begin() - slack || t > m_t_end + slack)
            throw Error(ErrorKind::OutOfDomain, "dense output outside integration span");
        if(t >= m_t_end)
            return m_x_end;
        auto it = std::upper_bound(m_t.begin(), m_t.end(), t);
        const std::size_t i = it == m_t.begin() ? 0 : static_cast<std::size_t>(it - m_t.begin()) - 1;
        return evaluate(i, (t - m_t[i]) / m_h[i]);
    }

private:
    friend DenseRkSolution dopri45(const std::function<Vec(const Vec &, double)> &, double, double, const Vec &,
                                   const RkSettings &, const std::function<double(const Vec &, double)> &);

    void push(double t0, double h, const Vec &x0, const std::array<Vec, 7> &k)
    {
        m_t.push_back(t0);
        m_h.push_back(h);
        m_data.insert(m_data.end(), x0.begin(), x0.end());
        for(const Vec &ks : k)
            m_data.insert(m_data.end(), ks.begin(), ks.end());
    }

    [[nodiscard]] Vec evaluate(std::size_t i, double theta) const
    {
        // 4th-order interpolant coefficients for the Dormand-Prince pair
        static constexpr double P[7][4] = {
            {1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0},
            {0.0, 0.0, 0.0, 0.0},
            {0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0},
            {0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0},
            {0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0,
             701980252875.0 / 199316789632.0},
            {0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0},
            {0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0}};
        const double p[4] = {theta, theta * theta, theta * theta * theta, theta * theta * theta * theta};
        const double h = m_h[i];
        const double *base = m_data.data() + i * 8 * m_dim;
        Vec x(base, base + m_dim);
        for(std::size_t st = 0; st < 7; ++st)
        {
            const double w = h * (P[st][0] * p[0] + P[st][1] * p[1] + P[st][2] * p[2] + P[st][3] * p[3]);
            if(w == 0.0)
                continue;
            const double *ks = base + (st + 1) * m_dim;
            for(std::size_t d = 0; d < m_dim; ++d)
                x[d] += w * ks[d];
        }
        return x;
    }

    std::size_t m_dim = 0;
    std::vector<double> m_t;
    std::vector<double> m_h;
    std::vector<double> m_data; // per step: x0 then k1..k7
    double m_t_end = 0.0;
    Vec m_x_end;
    double m_max_drift = 0.0;
};

/**
 * Adaptive Dormand-Prince 5(4) with PI step-size control and dense output.
 * `drift`, when given, is evaluated at every accepted step and its maximum
 * is reported.
 */
[[nodiscard]] inline DenseRkSolution dopri45(const std::function<Vec(const Vec &, double)> &rhs, double t0,
                                             double T, const Vec &x0, const RkSettings &s = {},
                                             const std::function<double(const Vec &, double)> &drift = {})
{
    constexpr double eps = std::numeric_limits<double>::epsilon();
    if(!(s.atol > 0.0) || !(s.rtol > 0.0))
        throw Error(ErrorKind::InvalidParams, "RK tolerances must be positive");
    if(s.rtol < 100.0 * eps)
        throw Error(ErrorKind::ToleranceUnreachable, "rtol below 100 machine epsilons");
    if(!(T > t0))
        throw Error(ErrorKind::InvalidGrid, "RK span must satisfy T > t0");

    static constexpr double c[7] = {0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0};
    static constexpr double a[7][6] = {
        {},
        {1.0 / 5.0},
        {3.0 / 40.0, 9.0 / 40.0},
        {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0},
        {19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0},
        {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0},
        {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0}};
    static constexpr double e[7] = {-71.0 / 57600.0, 0.0, 71.0 / 16695.0, -71.0 / 1920.0, 17253.0 / 339200.0,
                                    -22.0 / 525.0, 1.0 / 40.0};

    const std::size_t dim = x0.size();
    DenseRkSolution sol;
    sol.m_dim = dim;
    Vec x = x0;
    double t = t0;
    Vec k0 = rhs(x, t);

    auto err_scale = [&](const Vec &xa, const Vec &xb, std::size_t i) {
        return s.atol + s.rtol * std::max(std::abs(xa[i]), std::abs(xb[i]));
    };

    double h = s.first_step;
    if(!(h > 0.0))
    {
        // Hairer's starting-step heuristic
        double d0 = 0.0, d1 = 0.0;
        for(std::size_t i = 0; i < dim; ++i)
        {
            const double sc = s.atol + s.rtol * std::abs(x[i]);
            d0 += (x[i] / sc) * (x[i] / sc);
            d1 += (k0[i] / sc) * (k0[i] / sc);
        }
        d0 = std::sqrt(d0 / static_cast<double>(dim));
        d1 = std::sqrt(d1 / static_cast<double>(dim));
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, T - t0);
        Vec x1 = x;
        axpy(h0, k0, x1);
        Vec k1 = rhs(x1, t + h0);
        double d2 = 0.0;
        for(std::size_t i = 0; i < dim; ++i)
        {
            const double sc = s.atol + s.rtol * std::abs(x[i]);
            const double v = (k1[i] - k0[i]) / sc;
            d2 += v * v;
        }
        d2 = std::sqrt(d2 / static_cast<double>(dim)) / h0;
        const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                    : std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
        h = std::min(100.0 * h0, h1);
    }

    double err_prev = 1e-4;
    bool rejected_last = false;
    std::array<Vec, 7> k;
    if(drift)
        sol.m_max_drift = drift(x, t);

    while(t < T)
    {
        if(sol.m_t.size() >= s.max_steps)
            throw Error(ErrorKind::ToleranceUnreachable, "RK step budget exhausted at t=" + std::to_string(t));
        if(h < 16.0 * eps * std::max(1.0, std::abs(t)))
            throw Error(ErrorKind::StepSizeUnderflow, "RK step size underflow at t=" + std::to_string(t));
        bool last = false;
        if(t + h >= T || T - (t + h) < 1e-12 * std::max(1.0, std::abs(T)))
        {
            h = T - t;
            last = true;
        }

        k[0] = k0;
        for(std::size_t st = 1; st < 7; ++st)
        {
            Vec xs = x;
            for(std::size_t j = 0; j < st; ++j)
                if(a[st][j] != 0.0)
                    axpy(h * a[st][j], k[j], xs);
            if(st == 6)
            {
                // stage 7 is evaluated at the 5th-order solution (FSAL)
                k[6] = rhs(xs, t + h);
                break;
            }
            k[st] = rhs(xs, t + c[st] * h);
        }
        Vec xnew = x;
        for(std::size_t j = 0; j < 6; ++j)
            if(a[6][j] != 0.0)
                axpy(h * a[6][j], k[j], xnew);

        double err = 0.0;
        for(std::size_t i = 0; i < dim; ++i)
        {
            double ei = 0.0;
            for(std::size_t j = 0; j < 7; ++j)
                ei += e[j] * k[j][i];
            ei *= h;
            const double v = ei / err_scale(x, xnew, i);
            err += v * v;
        }
        err = std::sqrt(err / static_cast<double>(dim));
        if(!std::isfinite(err))
        {
            h *= s.min_factor;
            rejected_last = true;
            continue;
        }

        if(err <= 1.0)
        {
            double fac = err == 0.0 ? s.max_factor
                                    : s.safety * std::pow(err, -s.alpha) * std::pow(err_prev, s.beta);
            fac = std::clamp(fac, s.min_factor, s.max_factor);
            if(rejected_last)
                fac = std::min(fac, 1.0);
            sol.push(t, h, x, k);
            t = last ? T : t + h;
            x = std::move(xnew);
            k0 = k[6];
            err_prev = std::max(err, 1e-4);
            rejected_last = false;
            if(drift)
                sol.m_max_drift = std::max(sol.m_max_drift, drift(x, t));
            h *= fac;
        }
        else
        {
            h *= std::max(s.min_factor, s.safety * std::pow(err, -s.alpha));
            rejected_last = true;
        }
    }
    sol.m_t_end = T;
    sol.m_x_end = x;
    return sol;
}

/// Integrates the reduced ODE of `ode` over [t0, T] from x0 = [y0; z0].
[[nodiscard]] inline DenseRkSolution solve_reference(const ReducedODE &ode, double t0, double T, const Vec &x0,
                                                     const RkSettings &s = {})
{
    return dopri45([&ode](const Vec &x, double t) { return ode.rhs(x, t); }, t0, T, x0, s,
                   [&ode](const Vec &x, double t) { return ode.invariant_drift(x, t); });
}

} // namespace adjdae
