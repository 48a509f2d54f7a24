/*
 * Built-in problems: Robertson kinetics, the pendulum in index-1 and
 * index-2 form, a non-autonomous index-2 test problem with a closed-form
 * solution, and a staggered-grid semi-discretization of the electro-neutral
 * Nernst-Planck equations (ENNPE).
 */
#pragma once

#include "dae.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

namespace adjdae {

using ParamMap = std::map<std::string, double>;

namespace detail {

inline double param(const ParamMap &params, const std::string &key, double fallback)
{
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

inline void reject_unknown(const ParamMap &params, std::initializer_list<const char *> known,
                           const std::string &problem)
{
    for(const auto &[k, v] : params)
    {
        bool ok = false;
        for(const char *name : known)
            ok = ok || k == name;
        if(!ok)
            throw Error(ErrorKind::InvalidParams, "unknown parameter '" + k + "' for problem " + problem);
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Robertson
// ---------------------------------------------------------------------------

[[nodiscard]] inline DAEProblem make_robertson()
{
    DAEProblem p;
    p.name = "robertson";
    p.n = 2;
    p.m = 1;
    p.index = DaeIndex::Index1;
    p.f = [](const Vec &y, const Vec &z, double) {
        return Vec{-0.04 * y[0] + 1e4 * y[1] * z[0], 0.04 * y[0] - 1e4 * y[1] * z[0] - 3e7 * y[1] * y[1]};
    };
    p.g = [](const Vec &y, const Vec &z, double) { return Vec{y[0] + y[1] + z[0] - 1.0}; };
    p.fy = [](const Vec &y, const Vec &z, double) {
        return DenseMatrix{{-0.04, 1e4 * z[0]}, {0.04, -1e4 * z[0] - 6e7 * y[1]}};
    };
    p.fz = [](const Vec &y, const Vec &, double) { return DenseMatrix{{1e4 * y[1]}, {-1e4 * y[1]}}; };
    p.gy = [](const Vec &, const Vec &, double) { return DenseMatrix{{1.0, 1.0}}; };
    p.gz = [](const Vec &, const Vec &, double) { return DenseMatrix{{1.0}}; };
    p.ft = [](const Vec &, const Vec &, double) { return Vec{0.0, 0.0}; };
    p.gt = [](const Vec &, const Vec &, double) { return Vec{0.0}; };
    p.gyy = [](const Vec &, const Vec &, double) { return Tensor3(1, 2); };
    p.gyt = [](const Vec &, const Vec &, double) { return DenseMatrix(1, 2); };
    p.gtt = [](const Vec &, const Vec &, double) { return Vec{0.0}; };
    p.y0 = {1.0, 0.0};
    p.z0 = {0.0};
    return p;
}

// ---------------------------------------------------------------------------
// Pendulum
// ---------------------------------------------------------------------------

struct PendulumParams
{
    double mass = 1.0;
    double gravity = 9.81;
    double length = 1.0;
};

namespace detail {

inline void pendulum_common(DAEProblem &p, const PendulumParams &pp)
{
    const double mass = pp.mass, grav = pp.gravity, s = pp.length;
    p.n = 4;
    p.m = 1;
    p.f = [=](const Vec &y, const Vec &z, double) {
        return Vec{y[2], y[3], -2.0 * y[0] * z[0] / mass, -grav - 2.0 * y[1] * z[0] / mass};
    };
    p.fy = [=](const Vec &, const Vec &z, double) {
        const double a = -2.0 * z[0] / mass;
        return DenseMatrix{{0, 0, 1, 0}, {0, 0, 0, 1}, {a, 0, 0, 0}, {0, a, 0, 0}};
    };
    p.fz = [=](const Vec &y, const Vec &, double) {
        return DenseMatrix{{0.0}, {0.0}, {-2.0 * y[0] / mass}, {-2.0 * y[1] / mass}};
    };
    p.ft = [](const Vec &, const Vec &, double) { return Vec(4, 0.0); };
    p.gt = [](const Vec &, const Vec &, double) { return Vec{0.0}; };
    p.gyt = [](const Vec &, const Vec &, double) { return DenseMatrix(1, 4); };
    p.gtt = [](const Vec &, const Vec &, double) { return Vec{0.0}; };
    p.y0 = {0.0, -s, 1.0, 0.0};
    p.z0 = {mass * (1.0 + s * grav) / (2.0 * s * s)};
    p.params = {{"mass", mass}, {"gravity", grav}, {"length", s}};
}

} // namespace detail

/// Index-1 pendulum: constraint solved for the tension z.
[[nodiscard]] inline DAEProblem make_pendulum1(const PendulumParams &pp = {})
{
    DAEProblem p;
    p.name = "pendulum1";
    p.index = DaeIndex::Index1;
    detail::pendulum_common(p, pp);
    const double mass = pp.mass, grav = pp.gravity;
    p.g = [=](const Vec &y, const Vec &z, double) {
        return Vec{mass * (y[2] * y[2] + y[3] * y[3] - grav * y[1]) - 2.0 * z[0] * (y[0] * y[0] + y[1] * y[1])};
    };
    p.gy = [=](const Vec &y, const Vec &z, double) {
        return DenseMatrix{
            {-4.0 * z[0] * y[0], -mass * grav - 4.0 * z[0] * y[1], 2.0 * mass * y[2], 2.0 * mass * y[3]}};
    };
    p.gz = [](const Vec &y, const Vec &, double) {
        return DenseMatrix{{-2.0 * (y[0] * y[0] + y[1] * y[1])}};
    };
    p.gyy = [=](const Vec &, const Vec &z, double) {
        Tensor3 T(1, 4);
        T(0, 0, 0) = -4.0 * z[0];
        T(0, 1, 1) = -4.0 * z[0];
        T(0, 2, 2) = 2.0 * mass;
        T(0, 3, 3) = 2.0 * mass;
        return T;
    };
    return p;
}

/// Index-2 pendulum: velocity-level constraint y1*y3 + y2*y4 = 0.
[[nodiscard]] inline DAEProblem make_pendulum2(const PendulumParams &pp = {})
{
    DAEProblem p;
    p.name = "pendulum2";
    p.index = DaeIndex::Index2;
    detail::pendulum_common(p, pp);
    p.g = [](const Vec &y, const Vec &, double) { return Vec{y[0] * y[2] + y[1] * y[3]}; };
    p.gy = [](const Vec &y, const Vec &, double) { return DenseMatrix{{y[2], y[3], y[0], y[1]}}; };
    p.gyy = [](const Vec &, const Vec &, double) {
        Tensor3 T(1, 4);
        T(0, 0, 2) = T(0, 2, 0) = 1.0;
        T(0, 1, 3) = T(0, 3, 1) = 1.0;
        return T;
    };
    return p;
}

// ---------------------------------------------------------------------------
// Non-autonomous index-2 problem with exact solution
//   y1 = 1 + e^{lambda t},  y2 = e^{2 lambda t},  z = lambda
// ---------------------------------------------------------------------------

[[nodiscard]] inline DAEProblem make_petzold2(double lambda = -1.0)
{
    DAEProblem p;
    p.name = "petzold2";
    p.n = 2;
    p.m = 1;
    p.index = DaeIndex::Index2;
    const double L = lambda;
    p.f = [=](const Vec &y, const Vec &z, double t) {
        const double s2 = std::sin(t) * std::sin(t);
        const double u = y[0] - 1.0;
        return Vec{L * y[0] - z[0], (2.0 * L - s2) * y[1] + s2 * u * u};
    };
    p.g = [](const Vec &y, const Vec &, double) {
        const double u = y[0] - 1.0;
        return Vec{y[1] - u * u};
    };
    p.fy = [=](const Vec &y, const Vec &, double t) {
        const double s2 = std::sin(t) * std::sin(t);
        return DenseMatrix{{L, 0.0}, {2.0 * s2 * (y[0] - 1.0), 2.0 * L - s2}};
    };
    p.fz = [](const Vec &, const Vec &, double) { return DenseMatrix{{-1.0}, {0.0}}; };
    p.gy = [](const Vec &y, const Vec &, double) { return DenseMatrix{{-2.0 * (y[0] - 1.0), 1.0}}; };
    p.ft = [](const Vec &y, const Vec &, double t) {
        const double s = std::sin(2.0 * t);
        const double u = y[0] - 1.0;
        return Vec{0.0, s * (u * u - y[1])};
    };
    p.gt = [](const Vec &, const Vec &, double) { return Vec{0.0}; };
    p.gyy = [](const Vec &, const Vec &, double) {
        Tensor3 T(1, 2);
        T(0, 0, 0) = -2.0;
        return T;
    };
    p.gyt = [](const Vec &, const Vec &, double) { return DenseMatrix(1, 2); };
    p.gtt = [](const Vec &, const Vec &, double) { return Vec{0.0}; };
    p.y0 = {2.0, 1.0};
    p.z0 = {L};
    p.analytic = [=](double t) {
        const double e = std::exp(L * t);
        return State{{1.0 + e, e * e}, {L}};
    };
    p.params = {{"lambda", L}};
    p.preferred_reference = ReferenceBackend::Analytic;
    return p;
}

// ---------------------------------------------------------------------------
// ENNPE
// ---------------------------------------------------------------------------

/**
 * Staggered-grid discretization on [0, 1] with Ns cells. Concentrations
 * C, A live at cell centers x_j = (j + 1/2) dx; the potential gradient W
 * lives at the Ns - 1 interior edges (j + 1) dx.
 *
 *   C' = D_c (M C + B(C, W)),   A' = D_a (M A - B(A, W)),   0 = Pi(C) - Pi(A)
 *
 * where Pi drops the last cell. The last cell's constraint is implied by
 * conservation of sum(C) and sum(A).
 */
struct EnnpeAssembly
{
    std::size_t Ns = 0;
    double dx = 0.0;
    double Dc = 0.0;
    double Da = 0.0;

    [[nodiscard]] std::size_t n() const noexcept { return 2 * Ns; }
    [[nodiscard]] std::size_t m() const noexcept { return Ns - 1; }
    [[nodiscard]] double center(std::size_t j) const noexcept { return (static_cast<double>(j) + 0.5) * dx; }
    [[nodiscard]] double edge(std::size_t j) const noexcept { return static_cast<double>(j + 1) * dx; }

    /// Second-difference matrix with no-flux corners.
    [[nodiscard]] DenseMatrix M() const
    {
        DenseMatrix A(Ns, Ns);
        const double s = 1.0 / (dx * dx);
        for(std::size_t j = 0; j < Ns; ++j)
        {
            if(j > 0)
            {
                A(j, j - 1) = s;
                A(j, j) -= s;
            }
            if(j + 1 < Ns)
            {
                A(j, j + 1) = s;
                A(j, j) -= s;
            }
        }
        return A;
    }

    /// (M u)_j
    [[nodiscard]] Vec apply_M(const double *u) const
    {
        Vec out(Ns);
        const double s = 1.0 / (dx * dx);
        for(std::size_t j = 0; j < Ns; ++j)
        {
            double v = 0.0;
            if(j > 0)
                v += u[j - 1] - u[j];
            if(j + 1 < Ns)
                v += u[j + 1] - u[j];
            out[j] = s * v;
        }
        return out;
    }

    /// Drift B(u, W)_j = ((u_j + u_{j+1}) W_j - (u_{j-1} + u_j) W_{j-1}) / (2 dx).
    [[nodiscard]] Vec apply_B(const double *u, const Vec &W) const
    {
        Vec out(Ns);
        const double s = 0.5 / dx;
        for(std::size_t j = 0; j < Ns; ++j)
        {
            double v = 0.0;
            if(j + 1 < Ns)
                v += (u[j] + u[j + 1]) * W[j];
            if(j > 0)
                v -= (u[j - 1] + u[j]) * W[j - 1];
            out[j] = s * v;
        }
        return out;
    }
};

[[nodiscard]] inline EnnpeAssembly ennpe_assemble(std::size_t Ns, double Dc, double Da)
{
    if(Ns < 3)
        throw Error(ErrorKind::InvalidGrid, "ENNPE needs at least 3 cells");
    if(!(Dc > 0.0) || !(Da > 0.0))
        throw Error(ErrorKind::InvalidParams, "ENNPE diffusion coefficients must be positive");
    return {Ns, 1.0 / static_cast<double>(Ns), Dc, Da};
}

enum class EnnpeInitialMode { Discrete, Analytic };

/// Exact continuum solution sampled on the grid: y = [c; a] at centers, z = w at edges.
[[nodiscard]] inline State ennpe_analytic(const EnnpeAssembly &as, double t)
{
    constexpr double pi = std::numbers::pi;
    const double Deff = 2.0 * as.Dc * as.Da / (as.Dc + as.Da);
    const double e = std::exp(-pi * pi * Deff * t);
    const double k = (as.Da - as.Dc) / (as.Da + as.Dc);
    State s;
    s.y.resize(as.n());
    s.z.resize(as.m());
    for(std::size_t j = 0; j < as.Ns; ++j)
    {
        const double c = 2.0 + e * std::cos(pi * as.center(j));
        s.y[j] = c;
        s.y[as.Ns + j] = c;
    }
    for(std::size_t j = 0; j < as.m(); ++j)
    {
        const double x = as.edge(j);
        s.z[j] = k * (-pi * e * std::sin(pi * x)) / (2.0 + e * std::cos(pi * x));
    }
    return s;
}

/**
 * Initial data C0 = A0 = 2 + cos(pi x). The discrete W0 solves the hidden
 * constraint of the semi-discrete system exactly; the analytic W0 samples
 * the continuum solution at the edges.
 */
[[nodiscard]] inline State ennpe_initial_conditions(const EnnpeAssembly &as,
                                                    EnnpeInitialMode mode = EnnpeInitialMode::Discrete)
{
    State s = ennpe_analytic(as, 0.0);
    if(mode == EnnpeInitialMode::Analytic)
        return s;
    const double *C = s.y.data();
    const double *A = s.y.data() + as.Ns;
    for(std::size_t l = 0; l < as.m(); ++l)
    {
        const double num = (as.Dc * (C[l] - C[l + 1]) - as.Da * (A[l] - A[l + 1])) / as.dx;
        const double den = 0.5 * as.Dc * (C[l] + C[l + 1]) + 0.5 * as.Da * (A[l] + A[l + 1]);
        s.z[l] = num / den;
    }
    return s;
}

struct EnnpeParams
{
    std::size_t Ns = 50;
    double Dc = 0.1;
    double Da = 0.2;
    EnnpeInitialMode ic = EnnpeInitialMode::Discrete;
};

[[nodiscard]] inline DAEProblem make_ennpe(const EnnpeParams &ep = {})
{
    const EnnpeAssembly as = ennpe_assemble(ep.Ns, ep.Dc, ep.Da);
    const std::size_t Ns = as.Ns;
    DAEProblem p;
    p.name = "ennpe";
    p.n = as.n();
    p.m = as.m();
    p.index = DaeIndex::Index2;

    p.f = [as, Ns](const Vec &y, const Vec &z, double) {
        const double *C = y.data();
        const double *A = y.data() + Ns;
        const Vec MC = as.apply_M(C), MA = as.apply_M(A);
        const Vec BC = as.apply_B(C, z), BA = as.apply_B(A, z);
        Vec out(2 * Ns);
        for(std::size_t j = 0; j < Ns; ++j)
        {
            out[j] = as.Dc * (MC[j] + BC[j]);
            out[Ns + j] = as.Da * (MA[j] - BA[j]);
        }
        return out;
    };
    p.g = [Ns](const Vec &y, const Vec &, double) {
        Vec out(Ns - 1);
        for(std::size_t j = 0; j + 1 < Ns; ++j)
            out[j] = y[j] - y[Ns + j];
        return out;
    };
    const DenseMatrix Mmat = as.M();
    p.fy = [as, Ns, Mmat](const Vec &, const Vec &z, double) {
        DenseMatrix J(2 * Ns, 2 * Ns);
        const double s = 0.5 / as.dx;
        for(std::size_t j = 0; j < Ns; ++j)
        {
            // dB_j/du_{j-1}, dB_j/du_j, dB_j/du_{j+1}
            const double wl = j > 0 ? z[j - 1] : 0.0;
            const double wr = j + 1 < Ns ? z[j] : 0.0;
            double dB[3] = {-s * wl, s * (wr - wl), s * wr};
            for(int o = -1; o <= 1; ++o)
            {
                if((o < 0 && j == 0) || (o > 0 && j + 1 == Ns))
                    continue;
                const std::size_t c = j + static_cast<std::size_t>(o + 1) - 1;
                const double mv = Mmat(j, c);
                J(j, c) = as.Dc * (mv + dB[o + 1]);
                J(Ns + j, Ns + c) = as.Da * (mv - dB[o + 1]);
            }
        }
        return J;
    };
    p.fz = [as, Ns](const Vec &y, const Vec &, double) {
        DenseMatrix J(2 * Ns, Ns - 1);
        const double s = 0.5 / as.dx;
        const double *C = y.data();
        const double *A = y.data() + Ns;
        for(std::size_t j = 0; j < Ns; ++j)
        {
            if(j + 1 < Ns)
            {
                J(j, j) = as.Dc * s * (C[j] + C[j + 1]);
                J(Ns + j, j) = -as.Da * s * (A[j] + A[j + 1]);
            }
            if(j > 0)
            {
                J(j, j - 1) = -as.Dc * s * (C[j - 1] + C[j]);
                J(Ns + j, j - 1) = as.Da * s * (A[j - 1] + A[j]);
            }
        }
        return J;
    };
    p.gy = [Ns](const Vec &, const Vec &, double) {
        DenseMatrix J(Ns - 1, 2 * Ns);
        for(std::size_t j = 0; j + 1 < Ns; ++j)
        {
            J(j, j) = 1.0;
            J(j, Ns + j) = -1.0;
        }
        return J;
    };
    p.ft = [Ns](const Vec &, const Vec &, double) { return Vec(2 * Ns, 0.0); };
    p.gt = [Ns](const Vec &, const Vec &, double) { return Vec(Ns - 1, 0.0); };
    p.gyy = [Ns](const Vec &, const Vec &, double) { return Tensor3(Ns - 1, 2 * Ns); };
    p.gyt = [Ns](const Vec &, const Vec &, double) { return DenseMatrix(Ns - 1, 2 * Ns); };
    p.gtt = [Ns](const Vec &, const Vec &, double) { return Vec(Ns - 1, 0.0); };

    const State ic = ennpe_initial_conditions(as, ep.ic);
    p.y0 = ic.y;
    p.z0 = ic.z;
    p.analytic = [as](double t) { return ennpe_analytic(as, t); };
    p.preferred_reference = ReferenceBackend::FineBdfRichardson;
    p.default_refinement = 3;
    p.supports_ode_path = false;
    p.params = {{"Ns", static_cast<double>(ep.Ns)},
                {"Dc", ep.Dc},
                {"Da", ep.Da},
                {"analytic_ic", ep.ic == EnnpeInitialMode::Analytic ? 1.0 : 0.0}};
    return p;
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

struct ProblemInfo
{
    std::string name;
    std::string summary;
};

[[nodiscard]] inline std::vector<ProblemInfo> list_problems()
{
    return {
        {"robertson", "Robertson chemical kinetics, index 1 (n=2, m=1)"},
        {"pendulum1", "pendulum with position-level tension constraint, index 1 (n=4, m=1)"},
        {"petzold2", "non-autonomous Hessenberg problem with exact solution, index 2 (n=2, m=1)"},
        {"pendulum2", "pendulum with velocity-level constraint, index 2 (n=4, m=1)"},
        {"ennpe", "electro-neutral Nernst-Planck, staggered grid, index 2 (n=2Ns, m=Ns-1)"},
    };
}

[[nodiscard]] inline DAEProblem build_problem(const std::string &name, const ParamMap &params = {})
{
    using detail::param;
    if(name == "robertson")
    {
        detail::reject_unknown(params, {}, name);
        return make_robertson();
    }
    if(name == "pendulum1" || name == "pendulum2")
    {
        detail::reject_unknown(params, {"mass", "gravity", "length"}, name);
        PendulumParams pp{param(params, "mass", 1.0), param(params, "gravity", 9.81), param(params, "length", 1.0)};
        if(!(pp.mass > 0.0) || !(pp.length > 0.0))
            throw Error(ErrorKind::InvalidParams, "pendulum mass and length must be positive");
        return name == "pendulum1" ? make_pendulum1(pp) : make_pendulum2(pp);
    }
    if(name == "petzold2")
    {
        detail::reject_unknown(params, {"lambda"}, name);
        return make_petzold2(param(params, "lambda", -1.0));
    }
    if(name == "ennpe")
    {
        detail::reject_unknown(params, {"Ns", "Dc", "Da", "analytic_ic"}, name);
        EnnpeParams ep;
        const double Ns = param(params, "Ns", 50.0);
        if(Ns < 3.0 || Ns != std::floor(Ns))
            throw Error(ErrorKind::InvalidGrid, "ENNPE Ns must be an integer >= 3");
        ep.Ns = static_cast<std::size_t>(Ns);
        ep.Dc = param(params, "Dc", 0.1);
        ep.Da = param(params, "Da", 0.2);
        ep.ic = param(params, "analytic_ic", 0.0) != 0.0 ? EnnpeInitialMode::Analytic : EnnpeInitialMode::Discrete;
        return make_ennpe(ep);
    }
    throw Error(ErrorKind::UnknownProblem, "no problem named '" + name + "'");
}

} // namespace adjdae
