#include "partraj/admm.hpp"
#include "partraj/synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace partraj;

namespace
{
    double sigma(double t) { return t * t * t * (10.0 + t * (-15.0 + 6.0 * t)); }

    ProblemSpec quintic(double eps = 1e-9)
    {
        ProblemSpec spec;
        spec.cfg = {5, 3, 1, 5};
        spec.path.resize(2, 1);
        spec.path << 0.0, 1.0;
        spec.segments.resize(1);
        spec.start.values = Eigen::MatrixXd::Zero(3, 1);
        spec.end.values = Eigen::MatrixXd::Zero(3, 1);
        spec.end.values(0, 0) = 1.0;
        spec.start.fill = spec.end.fill = FillPolicy::FreeSingleSided;
        spec.solver.epsilon = eps;
        spec.solver.threads = 1;
        return spec;
    }

    // Segment with a corridor and a speed limit, plus random state.
    struct Fixture
    {
        ProblemSpec spec;
        SegmentMatrices mats;
        SegmentState st;
        Eigen::VectorXd z;
        double rho = 2.5;

        Fixture()
        {
            spec = synthetic::randomCorridorInstance(3, 3, 2);
            spec.v_max = 0.8;
            mats = buildSegmentMatrices(spec, 1);
            synthetic::Rng rng(5);
            const auto n = mats.gram.rows();
            auto rnd = [&](Eigen::Index k)
            {
                Eigen::VectorXd v(k);
                for (Eigen::Index i = 0; i < k; ++i)
                    v(i) = rng.uniform(-1.0, 1.0);
                return v;
            };
            st.coeffs = rnd(n);
            st.cont_dual = rnd(mats.boundary.rows());
            st.slack = rnd(mats.corridor.rows()).cwiseAbs();
            st.corridor_dual = rnd(mats.corridor.rows());
            const auto samples = static_cast<Eigen::Index>(mats.velocity.size());
            st.vel_proj.resize(2, samples);
            st.vel_dual.resize(2, samples);
            for (Eigen::Index j = 0; j < samples; ++j)
            {
                st.vel_proj.col(j) = rnd(2);
                st.vel_dual.col(j) = rnd(2);
            }
            z = rnd(mats.boundary.rows());
        }
    };
} // namespace

TEST(Admm, ClosedFormIsStationary)
{
    Fixture f;
    const Eigen::VectorXd c = closedFormSegmentUpdate(f.st, f.z, f.mats, f.rho);
    // Gradient of c'Qc + rho/2 |Mc - z + u|^2 + rho/2 |A c + s - b + v|^2 + rho/2 sum |A^v c - phi + w|^2.
    Eigen::VectorXd g = 2.0 * f.mats.gram * c + f.rho * f.mats.boundary.transpose() * (f.mats.boundary * c - f.z + f.st.cont_dual);
    g += f.rho * f.mats.corridor.transpose() *
         (f.mats.corridor * c + f.st.slack - f.mats.corridor_offsets + f.st.corridor_dual);
    for (std::size_t j = 0; j < f.mats.velocity.size(); ++j)
    {
        const auto col = static_cast<Eigen::Index>(j);
        g += f.rho * f.mats.velocity[j].transpose() *
             (f.mats.velocity[j] * c - f.st.vel_proj.col(col) + f.st.vel_dual.col(col));
    }
    EXPECT_LT(g.norm(), 1e-8 * (1.0 + c.norm()));
}

TEST(Admm, FactorCacheTracksRho)
{
    Fixture f;
    SegmentFactor factor;
    const Eigen::VectorXd a = closedFormSegmentUpdate(f.st, f.z, f.mats, 1.0, factor);
    const Eigen::VectorXd b = closedFormSegmentUpdate(f.st, f.z, f.mats, 3.0, factor);
    EXPECT_EQ(factor.rho, 3.0);
    EXPECT_TRUE(b.isApprox(closedFormSegmentUpdate(f.st, f.z, f.mats, 3.0)));
    EXPECT_FALSE(a.isApprox(b));
}

TEST(Admm, SlackProjectionIsNonnegativeMinimizer)
{
    Fixture f;
    const Eigen::VectorXd s = slackProject(f.st.coeffs, f.st.corridor_dual, f.mats);
    EXPECT_GE(s.minCoeff(), 0.0);
    const Eigen::VectorXd target = f.mats.corridor_offsets - f.mats.corridor * f.st.coeffs - f.st.corridor_dual;
    for (Eigen::Index k = 0; k < s.size(); ++k)
        EXPECT_EQ(s(k), std::max(0.0, target(k)));
}

TEST(Admm, BallProjection)
{
    const Eigen::Vector3d inside(0.1, 0.2, -0.3);
    EXPECT_EQ(ballProject(inside, 1.0), Eigen::VectorXd(inside));
    const Eigen::Vector3d outside(3.0, 4.0, 0.0);
    const Eigen::VectorXd p = ballProject(outside, 2.0);
    EXPECT_NEAR(p.norm(), 2.0, 1e-15);
    EXPECT_TRUE(p.normalized().isApprox(outside.normalized()));
    EXPECT_EQ(ballProject(p, 2.0), p);
}

TEST(Admm, DualUpdatesAccumulateResiduals)
{
    Fixture f;
    const Eigen::VectorXd u = dualUpdateU(f.st.cont_dual, f.st.coeffs, f.z, f.mats);
    EXPECT_TRUE((u - f.st.cont_dual).isApprox(f.mats.boundary * f.st.coeffs - f.z));
    const Eigen::VectorXd v = dualUpdateV(f.st.corridor_dual, f.st.coeffs, f.st.slack, f.mats);
    EXPECT_TRUE((v - f.st.corridor_dual).isApprox(f.mats.corridor * f.st.coeffs + f.st.slack - f.mats.corridor_offsets));
    const Eigen::VectorXd w0 = f.st.vel_dual.col(0);
    const Eigen::VectorXd phi = f.st.vel_proj.col(0);
    const Eigen::VectorXd w = dualUpdateW(w0, f.st.coeffs, phi, f.mats.velocity[0]);
    EXPECT_TRUE((w - w0).isApprox(f.mats.velocity[0] * f.st.coeffs - phi));
}

TEST(Admm, ConsensusAveragesAndRespectsFixed)
{
    ProblemSpec spec = synthetic::randomEqualityInstance(4, 3, 2, true);
    std::vector<SegmentMatrices> mats;
    for (int i = 0; i < 3; ++i)
        mats.push_back(buildSegmentMatrices(spec, i));
    InitialState init = initState(spec, mats);
    std::vector<Eigen::VectorXd> coeffs;
    for (int i = 0; i < 3; ++i)
        coeffs.push_back(Eigen::VectorXd::LinSpaced(12, 0.1 * i, 1.0 + i));
    const ConsensusState before = init.consensus;
    consensusUpdate(coeffs, mats, init.consensus);
    const Eigen::VectorXd avg = 0.5 * (rightStack(mats[0], coeffs[0]) + leftStack(mats[1], coeffs[1]));
    for (Eigen::Index e = 0; e < avg.size(); ++e)
    {
        if (before.fixed[1](e))
            EXPECT_EQ(init.consensus.points[1](e), before.points[1](e));
        else
            EXPECT_DOUBLE_EQ(init.consensus.points[1](e), avg(e));
    }
    // Pinned positions are fixed at the waypoints.
    EXPECT_EQ(init.consensus.points[2](0), spec.path(2, 0));
    EXPECT_TRUE(init.consensus.fixed[2](0));
    // Boundary entries never average.
    EXPECT_TRUE(init.consensus.points[0].head(3).isApprox(spec.start.values.col(0)));
}

TEST(Admm, InitStateMarksBoundaryEntries)
{
    ProblemSpec spec = quintic();
    std::vector<SegmentMatrices> mats{buildSegmentMatrices(spec, 0)};
    InitialState init = initState(spec, mats);
    const ConsensusState &cs = init.consensus;
    for (int r = 0; r < 5; ++r)
    {
        EXPECT_EQ(cs.fixed[0](r), r < 3);
        EXPECT_EQ(cs.single_sided[1](r), r >= 3);
    }
    EXPECT_EQ(cs.points[1](0), 1.0);
    spec.start.fill = FillPolicy::ZeroFixed;
    init = initState(spec, mats);
    EXPECT_TRUE(init.consensus.fixed[0].all());
}

TEST(Admm, StoppingRule)
{
    EXPECT_EQ(stoppingCheck(0.09, 0.09, 2, 0.05, 3, 10), Status::Converged);
    EXPECT_EQ(stoppingCheck(0.11, 0.01, 2, 0.05, 3, 10), Status::Running);
    EXPECT_EQ(stoppingCheck(0.01, 0.11, 2, 0.05, 10, 10), Status::IterationLimited);
    EXPECT_STREQ(statusName(Status::IterationLimited), "iteration-limited");
}

TEST(Admm, RhoBalancing)
{
    RhoState st;
    st.rho = 1.0;
    EXPECT_DOUBLE_EQ(updateRho(st, 100.0, 1.0), 1.0 / 1.1);
    EXPECT_DOUBLE_EQ(st.rho, 1.1);
    st.rho = 1.0;
    EXPECT_DOUBLE_EQ(updateRho(st, 1.0, 100.0), 1.1);
    EXPECT_DOUBLE_EQ(st.rho, 1.0 / 1.1);
    st.rho = 1.0;
    EXPECT_EQ(updateRho(st, 5.0, 1.0), 1.0);
    st.rho = st.max;
    updateRho(st, 100.0, 1.0);
    EXPECT_EQ(st.rho, st.max);
    st.adaptive = false;
    st.rho = 2.0;
    EXPECT_EQ(updateRho(st, 100.0, 1.0), 1.0);
    EXPECT_EQ(st.rho, 2.0);
}

TEST(Admm, RescaleDualsKeepsUnscaledMultipliers)
{
    Fixture f;
    const double oldRho = 2.0, newRho = 2.2;
    const Eigen::VectorXd lambda = oldRho * f.st.cont_dual;
    rescaleDuals(f.st, oldRho / newRho);
    EXPECT_TRUE((newRho * f.st.cont_dual).isApprox(lambda));
}

TEST(Admm, QuinticSingleSegment)
{
    const OptimizeResult res = optimize(quintic());
    ASSERT_EQ(res.status, Status::Converged);
    double dev = 0.0;
    for (int k = 0; k <= 1000; ++k)
        dev = std::max(dev, std::abs(res.trajectory.eval(k / 1000.0)(0) - sigma(k / 1000.0)));
    EXPECT_LE(dev, 1e-6);
    EXPECT_NEAR(res.objective, 720.0, 720.0 * 1e-6);
}

TEST(Admm, TimeScaleDoesNotChangeTheOptimum)
{
    ProblemSpec spec = synthetic::randomEqualityInstance(21, 3, 2);
    spec.solver.epsilon = 1e-7;
    spec.solver.max_iters = 200000;
    spec.solver.threads = 1;
    const OptimizeResult a = optimize(spec);
    spec.solver.time_scale = 1.0;
    const OptimizeResult b = optimize(spec);
    ASSERT_EQ(a.status, Status::Converged);
    ASSERT_EQ(b.status, Status::Converged);
    EXPECT_NEAR(a.objective, b.objective, 1e-4 * a.objective);
}

TEST(Admm, ObjectiveMatchesTrajectoryEffort)
{
    ProblemSpec spec = synthetic::randomEqualityInstance(8, 2, 2);
    spec.solver.epsilon = 1e-3;
    spec.solver.threads = 1;
    const OptimizeResult res = optimize(spec);
    // Simpson quadrature of |p'''|^2 over each piece.
    double effort = 0.0;
    for (int i = 0; i < res.trajectory.pieces(); ++i)
    {
        const double T = res.trajectory.durations()[static_cast<std::size_t>(i)];
        const int panels = 400;
        const double h = T / panels;
        for (int k = 0; k <= panels; ++k)
        {
            const double w = (k == 0 || k == panels) ? 1.0 : (k % 2 ? 4.0 : 2.0);
            effort += w * h / 3.0 * res.trajectory.evalLocal(i, k * h, 3).squaredNorm();
        }
    }
    EXPECT_NEAR(res.objective, effort, 1e-8 * effort);
}

TEST(Admm, TraceAndObserver)
{
    ProblemSpec spec = quintic(1e-12);
    spec.solver.max_iters = 25;
    int calls = 0;
    const OptimizeResult res = optimize(spec, [&](const TraceRecord &r) { EXPECT_EQ(r.iter, ++calls); });
    EXPECT_EQ(res.status, Status::IterationLimited);
    EXPECT_EQ(res.iterations, 25);
    EXPECT_EQ(calls, 25);
    ASSERT_EQ(res.trace.size(), 25u);
    for (std::size_t k = 1; k < res.trace.size(); ++k)
        EXPECT_GE(res.trace[k].wall_ms, res.trace[k - 1].wall_ms);
}

TEST(Admm, InvalidProblemThrows)
{
    ProblemSpec spec = quintic();
    spec.segments[0].duration = -1.0;
    EXPECT_THROW(Optimizer{spec}, InvalidProblem);
}

TEST(Admm, RhoFreezesAfterAdaptWindow)
{
    ProblemSpec spec = synthetic::randomCorridorInstance(9, 6, 2);
    spec.solver.epsilon = 1e-12;
    spec.solver.max_iters = 60;
    spec.solver.rho_adapt_iters = 20;
    spec.solver.threads = 1;
    const OptimizeResult res = optimize(spec);
    for (std::size_t k = 20; k < res.trace.size(); ++k)
        EXPECT_EQ(res.trace[k].rho, res.trace[20].rho);
}

TEST(Admm, ResidualHelperMatchesOptimizer)
{
    ProblemSpec spec = synthetic::randomEqualityInstance(2, 3, 2, true);
    spec.solver.time_scale = 1.0;
    spec.solver.adaptive_rho = false;
    spec.solver.epsilon = 1e-12;
    spec.solver.threads = 1;
    Optimizer opt(spec);
    opt.step();
    const ConsensusState before = opt.consensus();
    opt.step();
    std::vector<Eigen::VectorXd> coeffs;
    for (const auto &s : opt.segments())
        coeffs.push_back(s.coeffs);
    const Residuals r = residuals(coeffs, before, opt.consensus(), opt.rho().rho, opt.matrices());
    EXPECT_NEAR(r.primal, opt.trace().back().primal, 1e-10 * (1.0 + r.primal));
    EXPECT_NEAR(r.dual, opt.trace().back().dual, 1e-10 * (1.0 + r.dual));
}
