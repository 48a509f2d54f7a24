#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace adjdae;

TEST(Bdf1, ScalarOneStepClosedForm)
{
    const Trajectory tr = bdf1_solve(testutil::scalar_decay(), TimeGrid(0.0, 0.1, 1));
    ASSERT_EQ(tr.size(), 2u);
    EXPECT_NEAR(tr.Y[1][0], 1.0 / 1.1, 1e-13);
    EXPECT_NEAR(tr.Z[1][0], 1.0 / 1.1, 1e-13);
}

TEST(Bdf1, ScalarTenStepsClosedForm)
{
    const Trajectory tr = bdf1_solve(testutil::scalar_decay(), TimeGrid::from_step(0.0, 1.0, 0.1));
    EXPECT_NEAR(tr.Y.back()[0], std::pow(1.0 / 1.1, 10), 1e-12);
}

TEST(Bdf1, LinearProblemIsExact)
{
    const Trajectory tr = bdf1_solve(testutil::linear_exact(), TimeGrid::from_step(0.0, 1.0, 0.125));
    for(std::size_t k = 0; k < tr.size(); ++k)
    {
        EXPECT_EQ(tr.Y[k][0], 0.125 * static_cast<double>(k));
        EXPECT_EQ(tr.Z[k][0], tr.Y[k][0]);
    }
}

TEST(Bdf1, RobertsonConstraintEveryStep)
{
    const Trajectory tr = bdf1_solve(build_problem("robertson"), TimeGrid::from_step(0.0, 1.0, 0.001));
    for(std::size_t k = 0; k < tr.size(); ++k)
        EXPECT_LE(std::abs(tr.Y[k][0] + tr.Y[k][1] + tr.Z[k][0] - 1.0), 1e-12) << "step " << k;
}

TEST(Bdf1, PendulumVelocityConstraintEveryStep)
{
    const DAEProblem p = build_problem("pendulum2");
    const Trajectory tr = bdf1_solve(p, TimeGrid::from_step(0.0, 1.0, 0.001));
    double worst = 0.0;
    for(std::size_t k = 0; k < tr.size(); ++k)
        worst = std::max(worst, inf_norm(p.eval_g(tr.Y[k], tr.Z[k], tr.grid.node(k))));
    EXPECT_LE(worst, 1e-10);
}

TEST(Bdf1, PendulumPositionConstraintEveryStep)
{
    const DAEProblem p = build_problem("pendulum1");
    const Trajectory tr = bdf1_solve(p, TimeGrid::from_step(0.0, 1.0, 0.001));
    const double g = 9.81, mass = 1.0;
    for(std::size_t k = 0; k < tr.size(); ++k)
    {
        const Vec &y = tr.Y[k];
        const double c = mass * (y[2] * y[2] + y[3] * y[3] - g * y[1]) - 2.0 * tr.Z[k][0] * (y[0] * y[0] + y[1] * y[1]);
        EXPECT_LE(std::abs(c), 1e-10) << "step " << k;
    }
}

TEST(Bdf1, Deterministic)
{
    const DAEProblem p = build_problem("pendulum2");
    const Trajectory a = bdf1_solve(p, TimeGrid::from_step(0.0, 0.5, 0.001));
    const Trajectory b = bdf1_solve(p, TimeGrid::from_step(0.0, 0.5, 0.001));
    EXPECT_EQ(a.Y, b.Y);
    EXPECT_EQ(a.Z, b.Z);
}

TEST(Bdf1, StrideKeepsEveryKthNode)
{
    const DAEProblem p = build_problem("petzold2");
    const Trajectory full = bdf1_solve(p, TimeGrid(0.0, 1.0, 100));
    const Trajectory strided = bdf1_solve(p, TimeGrid(0.0, 1.0, 100), {}, nullptr, 4);
    ASSERT_EQ(strided.size(), 26u);
    for(std::size_t k = 0; k < strided.size(); ++k)
        EXPECT_EQ(strided.Y[k], full.Y[4 * k]);
    EXPECT_THROW((void)bdf1_solve(p, TimeGrid(0.0, 1.0, 100), {}, nullptr, 3), Error);
}

TEST(Bdf1, ReusedJacobianAgreesWithFullNewton)
{
    const DAEProblem p = build_problem("robertson");
    NewtonSettings reuse;
    reuse.reuse_jacobian = true;
    ForwardStats s_full, s_reuse;
    const Trajectory a = bdf1_solve(p, TimeGrid::from_step(0.0, 1.0, 0.001), {}, &s_full);
    const Trajectory b = bdf1_solve(p, TimeGrid::from_step(0.0, 1.0, 0.001), reuse, &s_reuse);
    EXPECT_LT(s_reuse.factorizations, s_full.factorizations);
    for(std::size_t i = 0; i < 2; ++i)
        EXPECT_NEAR(a.Y.back()[i], b.Y.back()[i], 1e-9); // 1e-12 Newton tolerance over 1000 steps
}

TEST(Bdf1, DimensionMismatchedInitialState)
{
    DAEProblem p = build_problem("robertson");
    p.y0 = {1.0};
    EXPECT_THROW((void)bdf1_solve(p, TimeGrid(0.0, 1.0, 10)), Error);
}

TEST(Bdf1, NonFiniteResidualReported)
{
    DAEProblem p = testutil::scalar_decay();
    p.f = [](const Vec &y, const Vec &, double) { return Vec{std::log(-y[0] - 2.0)}; };
    p.fy = nullptr;
    try
    {
        (void)bdf1_solve(p, TimeGrid(0.0, 1.0, 10));
        FAIL() << "expected an error";
    }
    catch(const Error &e)
    {
        EXPECT_TRUE(e.kind() == ErrorKind::NonFiniteValue || e.kind() == ErrorKind::NewtonDiverged) << e.what();
    }
}

TEST(Bdf1, InvalidNewtonSettings)
{
    NewtonSettings s;
    s.damping = 1.5;
    EXPECT_THROW((void)bdf1_solve(testutil::scalar_decay(), TimeGrid(0.0, 1.0, 10), s), Error);
}

TEST(Bdf1, FirstOrderConvergence)
{
    const DAEProblem p = build_problem("petzold2");
    auto err = [&](double dt) {
        const Trajectory tr = bdf1_solve(p, TimeGrid::from_step(0.0, 1.0, dt));
        return std::abs(tr.Y.back()[0] - p.analytic(1.0).y[0]);
    };
    const double order = std::log2(err(0.01) / err(0.005));
    EXPECT_NEAR(order, 1.0, 0.05);
}
