// Solve the pendulum index-1 DAE, estimate the error in the final
// tension z(T) with both adjoint paths, and compare to a reference.

#include <adjdae/adjdae.hpp>

#include <cstdio>

int main()
{
    using namespace adjdae;

    const DAEProblem p = build_problem("pendulum1");
    const double dt = 0.001, T = 1.0;
    const Trajectory traj = bdf1_solve(p, TimeGrid::from_step(p.t0, T, dt));

    // Q(x) = z(T)
    const QoISpec q = QoISpec::terminal(Vec(p.n, 0.0), Vec{1.0});
    const ReferenceSolution ref = build_reference(p, ReferenceBackend::Auto, dt, T);
    const double true_error = reference_qoi_error(p, traj, q, ref);

    std::printf("z(T) = %.10f, reference error = % .6e\n", traj.Z.back()[0], true_error);
    for(AdjointPath path : {AdjointPath::DAE, AdjointPath::ODE})
    {
        const AdjointSolution adj = solve_adjoint_backward(p, traj, q, path, p.default_refinement);
        ErrorReport rep = estimate_error(p, traj, q, adj);
        rep.qoi_numerical = qoi_value(traj, q);
        attach_reference(rep, true_error);
        std::printf("%-12s %-22s estimate = % .6e  effectivity = %.5f\n", to_string(path),
                    to_string(rep.representation), rep.total_estimate, *rep.effectivity);
        for(const auto &t : rep.terms)
            std::printf("    %-22s % .6e\n", t.name.c_str(), t.value);
    }
    return 0;
}
