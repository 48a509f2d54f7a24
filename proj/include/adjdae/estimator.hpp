/*
 * A posteriori QoI error estimates from adjoint-weighted residuals, plus
 * reference errors and effectivity ratios.
 *
 * Every representation has the form
 *     (phi_y(0), e_y(0)) + <phi_y, f(Y,Z) - Y'> + <phi_z, g(Y,Z)> + boundary terms at T
 * on the DAE path, and
 *     (nu(0), e(0)) + <nu_y, f(Y,Z) - Y'> + <nu_z, h(Y,Z) - Z'>
 * on the ODE path. Integrals use 5-point Gauss-Legendre on each panel of the
 * refined adjoint grid.
 */
#pragma once

#include "adjoint.hpp"
#include "forward.hpp"
#include "reduction.hpp"

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace adjdae {

struct NamedTerm
{
    std::string name;
    double value = 0.0;
};

struct ErrorReport
{
    AdjointPath path = AdjointPath::DAE;
    Representation representation = Representation::Index1Cumulative;
    std::vector<NamedTerm> terms;
    double total_estimate = 0.0;
    double qoi_numerical = 0.0; // Q(X)
    std::optional<double> reference_error;
    std::optional<double> effectivity;
    bool unreliable = false;

    /// Value of a named term; throws if absent.
    [[nodiscard]] double term(const std::string &name) const
    {
        for(const auto &t : terms)
            if(t.name == name)
                return t.value;
        throw Error(ErrorKind::InvalidParams, "no term named " + name);
    }

    [[nodiscard]] bool has_term(const std::string &name) const
    {
        for(const auto &t : terms)
            if(t.name == name)
                return true;
        return false;
    }
};

struct EstimateOptions
{
    /// Initial error e(0) = x(0) - X(0); empty means zero.
    Vec initial_error_y;
    Vec initial_error_z;
};

namespace detail {

/// Forward-solution state and slope at local coordinate theta of refined panel j.
struct PanelState
{
    Vec y, z, ydot, zdot;
};

inline PanelState panel_state(const Trajectory &traj, std::size_t r, std::size_t j, double theta)
{
    const std::size_t k = j / r;
    const double tf = (static_cast<double>(j % r) + theta) / static_cast<double>(r);
    const double inv = 1.0 / traj.grid.dt();
    return {lerp(traj.Y[k], traj.Y[k + 1], tf), lerp(traj.Z[k], traj.Z[k + 1], tf),
            inv * (traj.Y[k + 1] - traj.Y[k]), inv * (traj.Z[k + 1] - traj.Z[k])};
}

inline double weighted(const Vec &a0, const Vec &a1, double theta, const Vec &v)
{
    double s = 0.0;
    for(std::size_t i = 0; i < v.size(); ++i)
        s += ((1.0 - theta) * a0[i] + theta * a1[i]) * v[i];
    return s;
}

inline void check_adjoint_grid(const Trajectory &traj, const AdjointSolution &adj)
{
    if(adj.grid.N() != traj.grid.N() * adj.r || adj.phi_y.size() != adj.grid.N() + 1)
        throw Error(ErrorKind::DimensionMismatch, "adjoint grid does not refine the trajectory grid");
}

} // namespace detail

/// Evaluates the error representation matching the adjoint's path and QoI.
[[nodiscard]] inline ErrorReport estimate_error(const DAEProblem &p, const Trajectory &traj, const QoISpec &q,
                                                const AdjointSolution &adj, const EstimateOptions &opts = {})
{
    q.validate(p.n, p.m);
    const Representation expected = select_representation(p, q, adj.path);
    if(expected != adj.representation)
        throw Error(ErrorKind::PathMismatch, std::string("adjoint was built for ") + to_string(adj.representation) +
                                                 " but the QoI requires " + to_string(expected));
    detail::check_adjoint_grid(traj, adj);

    ErrorReport rep;
    rep.path = adj.path;
    rep.representation = adj.representation;
    const std::size_t r = adj.r;
    const double T = traj.grid.T();

    // initial-error term
    double ic = 0.0;
    if(!opts.initial_error_y.empty())
        ic += dot(adj.phi_y.front(), opts.initial_error_y);
    if(adj.path == AdjointPath::ODE && !opts.initial_error_z.empty())
        ic += dot(adj.phi_z.front(), opts.initial_error_z);
    rep.terms.push_back({"initial_condition", ic});

    const bool ode = adj.path == AdjointPath::ODE;
    const Vec integrals = gauss_legendre_5_panels(
        [&](std::size_t j, double theta, double t) {
            const detail::PanelState s = detail::panel_state(traj, r, j, theta);
            const Vec fv = p.eval_f(s.y, s.z, t);
            const Vec res_y = fv - s.ydot;
            const double a = detail::weighted(adj.phi_y[j], adj.phi_y[j + 1], theta, res_y);
            double b;
            if(ode)
                b = detail::weighted(adj.phi_z[j], adj.phi_z[j + 1], theta, reduced_h(p, s.y, s.z, t, fv) - s.zdot);
            else
                b = detail::weighted(adj.phi_z[j], adj.phi_z[j + 1], theta, p.eval_g(s.y, s.z, t));
            return Vec{a, b};
        },
        adj.grid.t0(), T, adj.grid.N(), 2);
    rep.terms.push_back({"residual_y", integrals[0]});
    rep.terms.push_back({ode ? "residual_z" : "constraint_z", integrals[1]});

    if(!ode && adj.representation != Representation::Index1Cumulative &&
       adj.representation != Representation::Index1TerminalDifferential)
    {
        const Vec &yT = traj.Y.back();
        const Vec &zT = traj.Z.back();
        const LinearizedOps ops = linearized_ops_at(p, traj, T, AdjointPath::DAE);
        const Vec gT = p.eval_g(yT, zT, T);
        switch(adj.representation)
        {
        case Representation::Index1Terminal:
        {
            const Vec a = lu_solve(ops.gz.transpose(), q.zeta_z);
            rep.terms.push_back({"zeta_z_constraint", -dot(a, gT)});
            break;
        }
        case Representation::Index2Cumulative:
        {
            const DenseMatrix A = matmul(ops.fz.transpose(), ops.gy.transpose());
            rep.terms.push_back({"psi_z_constraint", -dot(gT, lu_solve(A, q.psi_z(T)))});
            break;
        }
        case Representation::Index2Terminal:
        case Representation::Index2TerminalDifferential:
        {
            const DenseMatrix A = matmul(ops.fz.transpose(), ops.gy.transpose());
            const LU Alu(A);
            rep.terms.push_back({"zeta_y_constraint", -dot(Alu.solve(matvec_t(ops.fz, q.zeta_y)), gT)});
            if(adj.representation == Representation::Index2Terminal)
            {
                const Vec a = Alu.solve(q.zeta_z);
                const Vec v = matvec_t(ops.gy, a);
                const Vec ydot = piecewise_derivative(traj, T).y;
                rep.terms.push_back({"zeta_z_rhs", -dot(v, p.eval_f(yT, zT, T))});
                rep.terms.push_back({"zeta_z_slope", dot(v, ydot)});
                rep.terms.push_back(
                    {"zeta_z_fy_constraint", dot(Alu.solve(matvec_t(ops.fz, matvec_t(ops.fy, v))), gT)});
                rep.terms.push_back({"zeta_z_dgdt", -dot(a, dg_dt_at_end(p, traj))});
            }
            break;
        }
        default: break;
        }
    }

    double total = 0.0;
    for(const auto &t : rep.terms)
        total += t.value;
    rep.total_estimate = total;
    return rep;
}

// ---------------------------------------------------------------------------
// QoI values
// ---------------------------------------------------------------------------

/// Q evaluated on the piecewise-linear numerical solution.
[[nodiscard]] inline double qoi_value(const Trajectory &traj, const QoISpec &q, std::size_t r = 4)
{
    if(q.kind == QoIKind::Terminal)
        return dot(q.zeta_y, traj.Y.back()) + dot(q.zeta_z, traj.Z.back());
    const std::size_t panels = traj.grid.N() * r;
    const Vec v = gauss_legendre_5_panels(
        [&](std::size_t j, double theta, double t) {
            const detail::PanelState s = detail::panel_state(traj, r, j, theta);
            return Vec{dot(q.psi_y(t), s.y) + dot(q.psi_z(t), s.z)};
        },
        traj.grid.t0(), traj.grid.T(), panels, 1);
    return v[0];
}

// ---------------------------------------------------------------------------
// Reference solutions
// ---------------------------------------------------------------------------

[[nodiscard]] inline const char *to_string(ReferenceBackend b) noexcept
{
    switch(b)
    {
    case ReferenceBackend::Auto: return "auto";
    case ReferenceBackend::Analytic: return "analytic";
    case ReferenceBackend::RkAdaptive: return "rk-adaptive";
    case ReferenceBackend::FineBdfRichardson: return "fine-bdf-richardson";
    }
    return "unknown";
}

/// A high-accuracy solution x(t) = (y(t), z(t)) used to measure true QoI errors.
class ReferenceSolution
{
public:
    ReferenceSolution() = default;

    [[nodiscard]] ReferenceBackend backend() const noexcept { return m_backend; }
    [[nodiscard]] double t_end() const noexcept { return m_t_end; }
    /// Largest invariant residual seen along the reference (RK backend).
    [[nodiscard]] double invariant_drift() const noexcept { return m_drift; }
    /// Suggested quadrature panels per forward step for cumulative QoIs.
    [[nodiscard]] std::size_t quadrature_refinement() const noexcept { return m_quad_refinement; }
    /// For grid-based references: the dt the reference was built for.
    [[nodiscard]] std::optional<double> built_for_dt() const noexcept { return m_dt; }

    [[nodiscard]] State operator()(double t) const { return m_eval(t); }

    [[nodiscard]] static ReferenceSolution analytic(const DAEProblem &p, double T)
    {
        if(!p.has_analytic())
            throw Error(ErrorKind::NoAnalyticSolution, "problem " + p.name + " has no exact solution");
        ReferenceSolution ref;
        ref.m_backend = ReferenceBackend::Analytic;
        ref.m_t_end = T;
        ref.m_eval = p.analytic;
        return ref;
    }

    [[nodiscard]] static ReferenceSolution rk(const DAEProblem &p, double T, const RkSettings &s = {})
    {
        ReducedODE ode(p);
        Vec x0 = p.y0;
        x0.insert(x0.end(), p.z0.begin(), p.z0.end());
        auto sol = std::make_shared<DenseRkSolution>(solve_reference(ode, p.t0, T, x0, s));
        ReferenceSolution ref;
        ref.m_backend = ReferenceBackend::RkAdaptive;
        ref.m_t_end = T;
        ref.m_drift = sol->max_drift();
        const std::size_t n = p.n;
        ref.m_eval = [sol, n](double t) {
            Vec x = (*sol)(t);
            return State{Vec(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n)),
                         Vec(x.begin() + static_cast<std::ptrdiff_t>(n), x.end())};
        };
        return ref;
    }

    /**
     * Richardson extrapolation of BDF-1: 2 X(dt/64) - X(dt/32) on the dt/32
     * grid, linearly interpolated in between.
     */
    [[nodiscard]] static ReferenceSolution richardson(const DAEProblem &p, double dt, double T,
                                                      NewtonSettings newton = {})
    {
        newton.reuse_jacobian = true;
        const TimeGrid base = TimeGrid::from_step(p.t0, T, dt);
        const TimeGrid coarse(p.t0, T, base.N() * 32);
        const TimeGrid fine(p.t0, T, base.N() * 64);
        Trajectory xc = bdf1_solve(p, coarse, newton);
        const Trajectory xf = bdf1_solve(p, fine, newton, nullptr, 2);
        for(std::size_t k = 0; k < xc.Y.size(); ++k)
        {
            for(std::size_t i = 0; i < p.n; ++i)
                xc.Y[k][i] = 2.0 * xf.Y[k][i] - xc.Y[k][i];
            for(std::size_t i = 0; i < p.m; ++i)
                xc.Z[k][i] = 2.0 * xf.Z[k][i] - xc.Z[k][i];
        }
        auto traj = std::make_shared<Trajectory>(std::move(xc));
        ReferenceSolution ref;
        ref.m_backend = ReferenceBackend::FineBdfRichardson;
        ref.m_t_end = T;
        ref.m_quad_refinement = 32;
        ref.m_dt = dt;
        ref.m_eval = [traj](double t) { return interpolate(*traj, t); };
        return ref;
    }

private:
    ReferenceBackend m_backend = ReferenceBackend::Analytic;
    double m_t_end = 0.0;
    double m_drift = 0.0;
    std::size_t m_quad_refinement = 0;
    std::optional<double> m_dt;
    std::function<State(double)> m_eval;
};

struct ReferenceOptions
{
    RkSettings rk;
    NewtonSettings newton;
};

/// Concrete backend for `Auto`.
[[nodiscard]] inline ReferenceBackend resolve_backend(const DAEProblem &p, ReferenceBackend b)
{
    return b == ReferenceBackend::Auto ? p.preferred_reference : b;
}

/**
 * Builds a reference on [t0, T]. With `Auto`, an RK reference that fails
 * (step-size underflow or step budget exhausted) falls back to the
 * fine-grid Richardson reference for step `dt`.
 */
[[nodiscard]] inline ReferenceSolution build_reference(const DAEProblem &p, ReferenceBackend requested, double dt,
                                                       double T, const ReferenceOptions &opts = {})
{
    switch(resolve_backend(p, requested))
    {
    case ReferenceBackend::Analytic: return ReferenceSolution::analytic(p, T);
    case ReferenceBackend::FineBdfRichardson: return ReferenceSolution::richardson(p, dt, T, opts.newton);
    case ReferenceBackend::RkAdaptive:
    case ReferenceBackend::Auto:
        try
        {
            return ReferenceSolution::rk(p, T, opts.rk);
        }
        catch(const Error &e)
        {
            const bool fallback = requested == ReferenceBackend::Auto &&
                                  (e.kind() == ErrorKind::StepSizeUnderflow ||
                                   e.kind() == ErrorKind::ToleranceUnreachable);
            if(!fallback)
                throw;
            return ReferenceSolution::richardson(p, dt, T, opts.newton);
        }
    }
    throw Error(ErrorKind::InvalidParams, "unknown reference backend");
}

/// Q(x) - Q(X) using the reference solution x.
[[nodiscard]] inline double reference_qoi_error(const DAEProblem &p, const Trajectory &traj, const QoISpec &q,
                                                const ReferenceSolution &ref, std::size_t r = 4)
{
    q.validate(p.n, p.m);
    const double T = traj.grid.T();
    if(ref.t_end() < T - 1e-12 * std::max(1.0, T))
        throw Error(ErrorKind::OutOfDomain, "reference does not cover [t0, T]");
    if(q.kind == QoIKind::Terminal)
    {
        const State x = ref(T);
        return dot(q.zeta_y, x.y - traj.Y.back()) + dot(q.zeta_z, x.z - traj.Z.back());
    }
    const std::size_t rq = std::max(r, ref.quadrature_refinement());
    const Vec v = gauss_legendre_5_panels(
        [&](std::size_t j, double theta, double t) {
            const detail::PanelState s = detail::panel_state(traj, rq, j, theta);
            const State x = ref(t);
            return Vec{dot(q.psi_y(t), x.y - s.y) + dot(q.psi_z(t), x.z - s.z)};
        },
        traj.grid.t0(), T, traj.grid.N() * rq, 1);
    return v[0];
}

// ---------------------------------------------------------------------------
// Effectivity
// ---------------------------------------------------------------------------

inline constexpr double unreliable_threshold = 1e-10;

/// Estimate / reference error.
[[nodiscard]] inline double effectivity(const ErrorReport &rep)
{
    if(!rep.reference_error)
        throw Error(ErrorKind::ZeroReference, "report has no reference error");
    if(*rep.reference_error == 0.0)
        throw Error(ErrorKind::ZeroReference, "reference error is exactly zero");
    return rep.total_estimate / *rep.reference_error;
}

/// True when the reference error is lost in cancellation relative to Q(X).
[[nodiscard]] inline bool effectivity_unreliable(const ErrorReport &rep)
{
    return rep.reference_error &&
           std::abs(*rep.reference_error) < unreliable_threshold * std::abs(rep.qoi_numerical);
}

/// Stores the reference error and derived effectivity in `rep`.
inline void attach_reference(ErrorReport &rep, double reference_error)
{
    rep.reference_error = reference_error;
    rep.unreliable = effectivity_unreliable(rep);
    if(reference_error != 0.0)
        rep.effectivity = effectivity(rep);
}

// ---------------------------------------------------------------------------
// Cancellation diagnostic
// ---------------------------------------------------------------------------

struct CancellationSplit
{
    std::vector<double> parts; // I_1 .. I_k
    double total = 0.0;        // <phi_y, f - Y'> from the same quadrature pass
};

/**
 * Splits <phi_y, f(Y,Z) - Y'> into contributions from `parts` contiguous,
 * equally sized blocks of the differential variables.
 */
[[nodiscard]] inline CancellationSplit cancellation_split(const DAEProblem &p, const Trajectory &traj,
                                                          const AdjointSolution &adj, std::size_t parts = 4)
{
    if(parts < 1 || p.n % parts != 0)
        throw Error(ErrorKind::PartitionMismatch,
                    "n = " + std::to_string(p.n) + " is not divisible into " + std::to_string(parts) + " blocks");
    detail::check_adjoint_grid(traj, adj);
    const std::size_t block = p.n / parts;
    const Vec v = gauss_legendre_5_panels(
        [&](std::size_t j, double theta, double t) {
            const detail::PanelState s = detail::panel_state(traj, adj.r, j, theta);
            const Vec res = p.eval_f(s.y, s.z, t) - s.ydot;
            Vec out(parts + 1, 0.0);
            const Vec &a0 = adj.phi_y[j];
            const Vec &a1 = adj.phi_y[j + 1];
            for(std::size_t i = 0; i < p.n; ++i)
            {
                const double c = ((1.0 - theta) * a0[i] + theta * a1[i]) * res[i];
                out[i / block] += c;
                out[parts] += c;
            }
            return out;
        },
        adj.grid.t0(), adj.grid.T(), adj.grid.N(), parts + 1);
    CancellationSplit split;
    split.parts.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(parts));
    split.total = v[parts];
    return split;
}

} // namespace adjdae
