#include "partraj/oracle.hpp"
#include "partraj/synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace partraj;

namespace
{
    double sigma(double t) { return t * t * t * (10.0 + t * (-15.0 + 6.0 * t)); }

    ProblemSpec restToRest()
    {
        ProblemSpec spec;
        spec.cfg = {5, 3, 1, 5};
        spec.path.resize(2, 1);
        spec.path << 0.0, 1.0;
        spec.segments.resize(1);
        spec.start = synthetic::restBoundary(Eigen::VectorXd::Zero(1), 3);
        spec.end = synthetic::restBoundary(Eigen::VectorXd::Ones(1), 3);
        spec.start.fill = spec.end.fill = FillPolicy::FreeSingleSided;
        return spec;
    }

    double maxSpliceGap(const Trajectory &t, int orders)
    {
        double gap = 0.0;
        for (int i = 0; i + 1 < t.pieces(); ++i)
            for (int r = 0; r < orders; ++r)
                gap = std::max(gap, (t.evalLocal(i, t.durations()[static_cast<std::size_t>(i)], r) - t.evalLocal(i + 1, 0.0, r))
                                        .cwiseAbs()
                                        .maxCoeff());
        return gap;
    }
} // namespace

TEST(Oracle, QuinticReferenceIsSigma)
{
    const Eigen::Matrix<double, 6, 1> c = oracle::quinticReference(0, 0, 0, 1, 0, 0, 1.0);
    Eigen::Matrix<double, 6, 1> expected;
    expected << 0, 0, 0, 10, -15, 6;
    EXPECT_LT((c - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Oracle, QuinticReferenceHitsBoundaryData)
{
    synthetic::Rng rng(17);
    for (int trial = 0; trial < 20; ++trial)
    {
        double d[6];
        for (double &x : d)
            x = rng.uniform(-2.0, 2.0);
        const double T = rng.uniform(0.2, 3.0);
        const Eigen::VectorXd c = oracle::quinticReference(d[0], d[1], d[2], d[3], d[4], d[5], T);
        for (int r = 0; r < 3; ++r)
        {
            EXPECT_NEAR(basisRow(0.0, r, 5).dot(c), d[r], 1e-9);
            EXPECT_NEAR(basisRow(T, r, 5).dot(c), d[3 + r], 1e-9 * std::max(1.0, std::pow(T, -r)));
        }
    }
    EXPECT_THROW(oracle::quinticReference(0, 0, 0, 1, 0, 0, 0.0), std::invalid_argument);
}

TEST(Oracle, KktRecoversQuintic)
{
    const oracle::OracleResult res = oracle::kktSolve(restToRest(), false);
    EXPECT_NEAR(res.objective, 720.0, 1e-8);
    for (int k = 0; k <= 100; ++k)
        EXPECT_NEAR(res.trajectory.eval(k / 100.0)(0), sigma(k / 100.0), 1e-10);
}

TEST(Oracle, KktSplitQuinticKeepsOptimum)
{
    for (int n : {2, 4, 8})
    {
        const oracle::OracleResult res = oracle::kktSolve(synthetic::splitQuintic(n), false);
        EXPECT_NEAR(res.objective, 720.0, 1e-6) << n;
        EXPECT_LE(maxSpliceGap(res.trajectory, 5), 1e-7);
    }
}

TEST(Oracle, KktIsStationaryOnFeasibleSet)
{
    const ProblemSpec spec = synthetic::randomEqualityInstance(31, 3, 2, true);
    oracle::detail::EqualitySystem sys = oracle::detail::buildEqualities(spec, true);
    oracle::detail::eliminateRedundantRows(sys.a, sys.b);
    const oracle::OracleResult res = oracle::kktSolve(spec, true);
    Eigen::VectorXd x(sys.hessian.rows());
    for (int i = 0; i < 3; ++i)
        x.segment(i * 12, 12) = res.trajectory.coeffs()[static_cast<std::size_t>(i)];
    EXPECT_LT((sys.a * x - sys.b).cwiseAbs().maxCoeff(), 1e-9);
    // Gradient projected onto the null space of the constraints vanishes.
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sys.a);
    const Eigen::MatrixXd null = lu.kernel();
    const Eigen::VectorXd proj = null.transpose() * (sys.hessian * x);
    EXPECT_LT(proj.norm(), 1e-7 * (1.0 + (sys.hessian * x).norm()));
}

TEST(Oracle, PinsPassThroughWaypoints)
{
    const ProblemSpec spec = synthetic::randomEqualityInstance(5, 4, 3, false);
    const oracle::OracleResult res = oracle::kktSolve(spec, true);
    double t = 0.0;
    for (int i = 0; i < 4; ++i)
    {
        t += spec.segments[static_cast<std::size_t>(i)].duration;
        EXPECT_LT((res.trajectory.evalLocal(i, spec.segments[static_cast<std::size_t>(i)].duration, 0) -
                   spec.path.row(i + 1).transpose())
                      .cwiseAbs()
                      .maxCoeff(),
                  1e-9);
    }
    EXPECT_LE(maxSpliceGap(res.trajectory, spec.cfg.cont_orders), 1e-8);
    const oracle::OracleResult free = oracle::kktSolve(spec, false);
    EXPECT_LE(free.objective, res.objective + 1e-9);
}

TEST(Oracle, SizeGuards)
{
    EXPECT_THROW(oracle::kktSolve(synthetic::randomEqualityInstance(1, 100), false), oracle::OracleError);
    EXPECT_THROW(oracle::activeSetQp(synthetic::randomSlabInstance(1, 4, 3), false), oracle::OracleError);
    EXPECT_THROW(oracle::activeSetQp(synthetic::randomSlabInstance(1, 2, 8), false), oracle::OracleError);
}

TEST(Oracle, InconsistentEqualitiesRefused)
{
    ProblemSpec spec = restToRest();
    spec.start.fill = spec.end.fill = FillPolicy::ZeroFixed;
    EXPECT_THROW(oracle::kktSolve(spec, false), oracle::OracleError);
}

TEST(Oracle, ActiveSetWithSlackCorridorEqualsKkt)
{
    ProblemSpec spec = synthetic::randomSlabInstance(3, 2, 4, 50.0);
    const oracle::OracleResult a = oracle::activeSetQp(spec, false);
    const oracle::OracleResult k = oracle::kktSolve(spec, false);
    EXPECT_EQ(a.active_rows, 0);
    EXPECT_NEAR(a.objective, k.objective, 1e-9 * k.objective);
}

TEST(Oracle, ActiveSetIsFeasibleAndNoBetterThanKkt)
{
    for (std::uint64_t seed : {300u, 301u, 302u})
    {
        const ProblemSpec spec = synthetic::randomSlabInstance(seed, 2, 4);
        const oracle::OracleResult a = oracle::activeSetQp(spec, false);
        const oracle::OracleResult k = oracle::kktSolve(spec, false);
        EXPECT_GE(a.objective, k.objective - 1e-9);
        for (int i = 0; i < 2; ++i)
        {
            const SegmentSpec &seg = spec.segments[static_cast<std::size_t>(i)];
            const Eigen::VectorXd ts = sampleTimes(seg.duration, seg.samples);
            for (Eigen::Index j = 0; j < ts.size(); ++j)
                EXPECT_LE(seg.polytope.violation(a.trajectory.evalLocal(i, ts(j), 0)), 1e-9);
        }
    }
}

TEST(Oracle, TighterCorridorNeverLowersOptimum)
{
    const ProblemSpec spec = synthetic::randomSlabInstance(301, 2, 4);
    const oracle::OracleResult a = oracle::activeSetQp(spec, false);
    ProblemSpec tight = spec;
    for (auto &seg : tight.segments)
        seg.polytope.offsets.array() -= 0.01;
    const oracle::OracleResult inner = oracle::activeSetQp(tight, false);
    EXPECT_GE(inner.objective, a.objective - 1e-9);
}

TEST(Oracle, SimilarityMetric)
{
    const oracle::OracleResult res = oracle::kktSolve(restToRest(), false);
    oracle::ReferenceCurve same{1.0, [&](double t) { return res.trajectory.eval(t); }};
    const oracle::Similarity exact = oracle::similarityMetric(res.trajectory, same);
    EXPECT_TRUE(exact.exact);
    EXPECT_DOUBLE_EQ(exact.value, -300.0);

    oracle::ReferenceCurve shifted{1.0, [&](double t) { return Eigen::VectorXd(res.trajectory.eval(t).array() + 1e-3); }};
    const oracle::Similarity s = oracle::similarityMetric(res.trajectory, shifted);
    EXPECT_NEAR(s.sum, 8192 * 1e-3, 1e-9);
    EXPECT_NEAR(s.value, std::log10(8.192), 1e-9);

    oracle::ReferenceCurve wrong{2.0, same.position};
    EXPECT_THROW(oracle::similarityMetric(res.trajectory, wrong), std::invalid_argument);
}
