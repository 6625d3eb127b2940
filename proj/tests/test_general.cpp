#include "partraj/admm.hpp"
#include "partraj/general.hpp"
#include "partraj/lbfgs.hpp"
#include "partraj/synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace partraj;

namespace
{
    struct SegmentCase
    {
        ProblemSpec spec;
        SegmentMatrices mats;
        std::vector<ConvexConstraint> cons;
        Eigen::VectorXd c, z, u, y;
        double rho = 1.7;

        explicit SegmentCase(double vMax = 0.5)
        {
            spec = synthetic::randomCorridorInstance(12, 2, 2);
            spec.v_max = vMax;
            mats = buildSegmentMatrices(spec, 0);
            cons = builtinConstraints(mats, spec.v_max);
            synthetic::Rng rng(99);
            auto rnd = [&](Eigen::Index n, double s)
            {
                Eigen::VectorXd v(n);
                for (Eigen::Index i = 0; i < n; ++i)
                    v(i) = rng.uniform(-s, s);
                return v;
            };
            c = rnd(mats.gram.rows(), 2.0);
            z = rnd(mats.boundary.rows(), 1.0);
            u = rnd(mats.boundary.rows(), 0.2);
            y = rnd(static_cast<Eigen::Index>(cons.size()), 1.0).cwiseAbs();
        }
    };

    Eigen::VectorXd numericGradient(const std::function<double(const Eigen::VectorXd &)> &f, const Eigen::VectorXd &x)
    {
        Eigen::VectorXd g(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i)
        {
            const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
            Eigen::VectorXd a = x, b = x;
            a(i) += h;
            b(i) -= h;
            g(i) = (f(a) - f(b)) / (2.0 * h);
        }
        return g;
    }
} // namespace

TEST(General, SquaredHinge)
{
    EXPECT_EQ(squaredHinge(-2.0), 0.0);
    EXPECT_EQ(squaredHinge(0.0), 0.0);
    EXPECT_EQ(squaredHinge(3.0), 9.0);
    EXPECT_EQ(squaredHingeSlope(-1.0), 0.0);
    EXPECT_EQ(squaredHingeSlope(1.5), 3.0);
}

TEST(General, BuiltinConstraintCountsAndTags)
{
    SegmentCase s;
    EXPECT_EQ(s.cons.size(), static_cast<std::size_t>(s.mats.corridor.rows()) + s.mats.velocity.size());
    EXPECT_EQ(s.cons.front().tag, ConstraintTag::CorridorRow);
    EXPECT_EQ(s.cons.back().tag, ConstraintTag::VelocityBall);
    EXPECT_STREQ(tagName(ConstraintTag::VelocityBall), "velocity-ball");
    EXPECT_TRUE(velocityConstraints(s.mats, std::numeric_limits<double>::infinity()).empty());
}

TEST(General, ConstraintGradientsMatchFiniteDifferences)
{
    SegmentCase s;
    Eigen::VectorXd grad(s.c.size()), scratch(s.c.size());
    for (std::size_t q = 0; q < s.cons.size(); q += 5)
    {
        s.cons[q].evaluate(s.c, grad);
        const Eigen::VectorXd fd = numericGradient([&](const Eigen::VectorXd &x) { return s.cons[q].evaluate(x, scratch); }, s.c);
        EXPECT_LT((grad - fd).norm(), 1e-5 * (1.0 + grad.norm())) << "constraint " << q;
    }
}

TEST(General, CorridorConstraintValue)
{
    SegmentCase s;
    Eigen::VectorXd grad(s.c.size());
    const double g0 = s.cons[3].evaluate(s.c, grad);
    EXPECT_NEAR(g0, s.mats.corridor.row(3).dot(s.c) - s.mats.corridor_offsets(3), 1e-12);
}

TEST(General, AugLagrangianGradient)
{
    SegmentCase s;
    ASSERT_TRUE(std::any_of(s.cons.begin(), s.cons.end(), [&](const ConvexConstraint &k)
                            { Eigen::VectorXd g(s.c.size()); return k.evaluate(s.c, g) > 0.0; }));
    Eigen::VectorXd grad(s.c.size()), scratch(s.c.size());
    augLagrangian(s.c, s.z, s.u, s.mats, s.cons, s.y, s.rho, grad);
    const Eigen::VectorXd fd = numericGradient(
        [&](const Eigen::VectorXd &x) { return augLagrangian(x, s.z, s.u, s.mats, s.cons, s.y, s.rho, scratch); }, s.c);
    EXPECT_LT((grad - fd).norm(), 1e-5 * (1.0 + grad.norm()));
}

TEST(General, AugLagrangianIgnoresSatisfiedConstraints)
{
    SegmentCase s(1e6);
    const std::vector<ConvexConstraint> vel = velocityConstraints(s.mats, 1e6);
    Eigen::VectorXd g1(s.c.size()), g2(s.c.size());
    const double a = augLagrangian(s.c, s.z, s.u, s.mats, vel, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(vel.size())), s.rho, g1);
    const double b = augLagrangian(s.c, s.z, s.u, s.mats, {}, Eigen::VectorXd(), s.rho, g2);
    EXPECT_EQ(a, b);
    EXPECT_EQ(g1, g2);
}

TEST(General, NonFiniteConstraintRaises)
{
    SegmentCase s;
    std::vector<ConvexConstraint> bad{{ConstraintTag::User, [](const Eigen::VectorXd &, Eigen::VectorXd &g)
                                       {
                                           g.setZero();
                                           return std::nan("");
                                       }}};
    Eigen::VectorXd grad(s.c.size());
    EXPECT_THROW(augLagrangian(s.c, s.z, s.u, s.mats, bad, Eigen::VectorXd::Zero(1), s.rho, grad), NumericFailure);
}

TEST(General, NumericUpdateMatchesClosedFormWithoutConstraints)
{
    SegmentCase s;
    SegmentMatrices plain = s.mats;
    plain.corridor.resize(0, s.c.size());
    plain.corridor_offsets.resize(0);
    plain.velocity.clear();
    plain.normal_sum = plain.boundary.transpose() * plain.boundary;
    SegmentState st;
    st.coeffs = s.c;
    st.cont_dual = s.u;
    st.vel_proj.resize(2, 0);
    st.vel_dual.resize(2, 0);
    const Eigen::VectorXd exact = closedFormSegmentUpdate(st, s.z, plain, s.rho);
    InnerSolverOptions inner;
    inner.grad_tol = 1e-10;
    inner.max_iters = 2000;
    const NumericUpdate up = numericSegmentUpdate(s.c, s.z, s.u, plain, {}, Eigen::VectorXd(), s.rho, inner);
    EXPECT_LT((up.coeffs - exact).norm(), 1e-6 * (1.0 + exact.norm()));
}

TEST(General, MultiplierUpdateAddsRhoTimesPenalty)
{
    SegmentCase s;
    InnerSolverOptions inner;
    inner.max_iters = 5;
    const NumericUpdate up = numericSegmentUpdate(s.c, s.z, s.u, s.mats, s.cons, s.y, s.rho, inner);
    Eigen::VectorXd grad(s.c.size());
    for (std::size_t q = 0; q < s.cons.size(); ++q)
    {
        const double g = squaredHinge(s.cons[q].evaluate(up.coeffs, grad));
        EXPECT_NEAR(up.multipliers(static_cast<Eigen::Index>(q)), s.y(static_cast<Eigen::Index>(q)) + s.rho * g, 1e-12);
    }
    EXPECT_GE(up.multipliers.minCoeff(), 0.0);
}

TEST(Lbfgs, Rosenbrock)
{
    auto f = [](const Eigen::VectorXd &x, Eigen::VectorXd &g)
    {
        const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
        g.resize(2);
        g(0) = -2.0 * a - 400.0 * x(0) * b;
        g(1) = 200.0 * b;
        return a * a + 100.0 * b * b;
    };
    LbfgsOptions opts;
    opts.max_iters = 500;
    opts.grad_tol = 1e-10;
    const LbfgsResult r = lbfgsMinimize(f, Eigen::Vector2d(-1.2, 1.0), opts);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.x(0), 1.0, 1e-6);
    EXPECT_NEAR(r.x(1), 1.0, 1e-6);
}

TEST(Lbfgs, ConvexQuadratic)
{
    Eigen::MatrixXd a(4, 4);
    a << 4, 1, 0, 0, 1, 3, 0.5, 0, 0, 0.5, 2, 0.1, 0, 0, 0.1, 1;
    const Eigen::Vector4d b(1, -2, 0.5, 3);
    auto f = [&](const Eigen::VectorXd &x, Eigen::VectorXd &g)
    {
        g = a * x - b;
        return 0.5 * x.dot(a * x) - b.dot(x);
    };
    LbfgsOptions opts;
    opts.grad_tol = 1e-12;
    const LbfgsResult r = lbfgsMinimize(f, Eigen::Vector4d::Zero(), opts);
    EXPECT_TRUE((r.x - a.ldlt().solve(b)).norm() < 1e-9);
}

TEST(Lbfgs, StartsAtOptimum)
{
    auto f = [](const Eigen::VectorXd &x, Eigen::VectorXd &g)
    {
        g = 2.0 * x;
        return x.squaredNorm();
    };
    const LbfgsResult r = lbfgsMinimize(f, Eigen::Vector3d::Zero());
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.iterations, 0);
}
