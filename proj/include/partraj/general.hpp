#pragma once

#include "partraj/lbfgs.hpp"
#include "partraj/problem.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace partraj
{

    enum class ConstraintTag
    {
        CorridorRow,
        VelocityBall,
        User
    };

    inline const char *tagName(ConstraintTag tag)
    {
        switch (tag)
        {
        case ConstraintTag::CorridorRow:
            return "corridor-row";
        case ConstraintTag::VelocityBall:
            return "velocity-ball";
        default:
            return "user";
        }
    }

    // Convex inequality g0(c) <= 0 on one segment's coefficients. `evaluate`
    // returns g0 and writes its gradient into the preallocated vector.
    // Convexity is the caller's responsibility.
    struct ConvexConstraint
    {
        ConstraintTag tag = ConstraintTag::User;
        std::function<double(const Eigen::VectorXd &, Eigen::VectorXd &)> evaluate;
    };

    // g = max(0, g0)^2, continuously differentiable with dg = 2 max(0, g0) dg0.
    inline double squaredHinge(double g0)
    {
        const double h = std::max(0.0, g0);
        return h * h;
    }

    inline double squaredHingeSlope(double g0) { return 2.0 * std::max(0.0, g0); }

    // a_r^T c - b_r <= 0 for every corridor row.
    inline std::vector<ConvexConstraint> corridorConstraints(const SegmentMatrices &mats)
    {
        std::vector<ConvexConstraint> out;
        out.reserve(static_cast<std::size_t>(mats.corridor.rows()));
        for (Eigen::Index r = 0; r < mats.corridor.rows(); ++r)
        {
            Eigen::VectorXd a = mats.corridor.row(r).transpose();
            const double b = mats.corridor_offsets(r);
            out.push_back({ConstraintTag::CorridorRow,
                           [a = std::move(a), b](const Eigen::VectorXd &c, Eigen::VectorXd &grad)
                           {
                               grad = a;
                               return a.dot(c) - b;
                           }});
        }
        return out;
    }

    // |A^v c|^2 - v_max^2 <= 0 at every velocity sample.
    inline std::vector<ConvexConstraint> velocityConstraints(const SegmentMatrices &mats, double vMax)
    {
        std::vector<ConvexConstraint> out;
        if (!std::isfinite(vMax))
            return out;
        out.reserve(mats.velocity.size());
        for (const auto &av : mats.velocity)
        {
            out.push_back({ConstraintTag::VelocityBall,
                           [av, v2 = vMax * vMax](const Eigen::VectorXd &c, Eigen::VectorXd &grad)
                           {
                               const Eigen::VectorXd vel = av * c;
                               grad.noalias() = 2.0 * av.transpose() * vel;
                               return vel.squaredNorm() - v2;
                           }});
        }
        return out;
    }

    inline std::vector<ConvexConstraint> builtinConstraints(const SegmentMatrices &mats, double vMax)
    {
        auto out = corridorConstraints(mats);
        auto vel = velocityConstraints(mats, vMax);
        out.insert(out.end(), std::make_move_iterator(vel.begin()), std::make_move_iterator(vel.end()));
        return out;
    }

    // c'Q~c + rho/2 |M~c - z~ + u|^2 + sum_q [rho/2 g_q^2 + y_q g_q], g_q = max(0, g0_q)^2.
    inline double augLagrangian(const Eigen::VectorXd &c, const Eigen::VectorXd &zTilde,
                                const Eigen::VectorXd &u, const SegmentMatrices &mats,
                                const std::vector<ConvexConstraint> &constraints,
                                const Eigen::VectorXd &y, double rho, Eigen::VectorXd &grad)
    {
        const Eigen::VectorXd qc = mats.gram * c;
        const Eigen::VectorXd gap = mats.boundary * c - zTilde + u;
        double value = c.dot(qc) + 0.5 * rho * gap.squaredNorm();
        grad.noalias() = 2.0 * qc;
        grad.noalias() += rho * (mats.boundary.transpose() * gap);

        Eigen::VectorXd g0grad(c.size());
        for (std::size_t q = 0; q < constraints.size(); ++q)
        {
            const double g0 = constraints[q].evaluate(c, g0grad);
            if (!std::isfinite(g0) || !g0grad.allFinite())
                throw NumericFailure(std::string("non-finite ") + tagName(constraints[q].tag) +
                                     " constraint " + std::to_string(q));
            if (g0 <= 0.0)
                continue;
            const double g = squaredHinge(g0);
            value += 0.5 * rho * g * g + y(static_cast<Eigen::Index>(q)) * g;
            grad.noalias() += ((rho * g + y(static_cast<Eigen::Index>(q))) * squaredHingeSlope(g0)) * g0grad;
        }
        if (!std::isfinite(value))
            throw NumericFailure("non-finite augmented Lagrangian");
        return value;
    }

    struct NumericUpdate
    {
        Eigen::VectorXd coeffs;
        Eigen::VectorXd multipliers;
        LbfgsResult inner;
    };

    // Inner minimization warm-started at cPrev, then y_q += rho g_q(c).
    inline NumericUpdate numericSegmentUpdate(const Eigen::VectorXd &cPrev, const Eigen::VectorXd &zTilde,
                                              const Eigen::VectorXd &u, const SegmentMatrices &mats,
                                              const std::vector<ConvexConstraint> &constraints,
                                              const Eigen::VectorXd &y, double rho,
                                              const InnerSolverOptions &inner = {})
    {
        LbfgsOptions opts;
        opts.memory = inner.memory;
        opts.max_iters = inner.max_iters;
        opts.grad_tol = inner.grad_tol;
        auto fn = [&](const Eigen::VectorXd &c, Eigen::VectorXd &grad)
        { return augLagrangian(c, zTilde, u, mats, constraints, y, rho, grad); };

        NumericUpdate out;
        out.inner = lbfgsMinimize(fn, cPrev, opts);
        out.coeffs = out.inner.x;
        out.multipliers = y;
        Eigen::VectorXd scratch(cPrev.size());
        for (std::size_t q = 0; q < constraints.size(); ++q)
            out.multipliers(static_cast<Eigen::Index>(q)) +=
                rho * squaredHinge(constraints[q].evaluate(out.coeffs, scratch));
        return out;
    }

} // namespace partraj
