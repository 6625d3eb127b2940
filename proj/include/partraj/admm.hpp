#pragma once

#include "partraj/basis.hpp"
#include "partraj/general.hpp"
#include "partraj/parallel.hpp"
#include "partraj/problem.hpp"
#include "partraj/trajectory.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace partraj
{

    // Per-segment iterates. Duals u, v, w are scaled (multiplier / rho); the
    // numeric path's multipliers y are unscaled.
    struct SegmentState
    {
        Eigen::VectorXd coeffs;        // c_i, m(D+1)
        Eigen::VectorXd cont_dual;     // u_i, 2ms: left block then right block
        Eigen::VectorXd slack;         // s_i >= 0, one per corridor row
        Eigen::VectorXd corridor_dual; // v_i
        Eigen::MatrixXd vel_proj;      // phi_ij, one column per sample
        Eigen::MatrixXd vel_dual;      // w_ij
        Eigen::VectorXd multipliers;   // y, numeric path only
    };

    // Splitting-point derivative stacks z_0..z_N (dimension-major, orders 0..s-1)
    // and the entries that never move during iteration.
    struct ConsensusState
    {
        std::vector<Eigen::VectorXd> points;
        std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> fixed;
        // Boundary entries updated from their single adjacent segment.
        std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> single_sided;

        // (z_{i-1}; z_i) for segment i (0-based: points i and i+1).
        Eigen::VectorXd pair(int i) const
        {
            const auto ms = points[0].size();
            Eigen::VectorXd out(2 * ms);
            out << points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(i) + 1];
            return out;
        }
    };

    struct RhoState
    {
        double rho = 1.0;
        double mu = 10.0;
        double tau_incr = 1.1;
        double tau_decr = 1.1;
        double min = 1e-4;
        double max = 1e8;
        bool adaptive = true;
    };

    struct TraceRecord
    {
        int iter = 0;
        double primal = 0.0;
        double dual = 0.0;
        double rho = 0.0;
        double objective = 0.0;
        double max_corridor_violation = 0.0;
        double max_velocity_excess = 0.0;
        double wall_ms = 0.0;
    };

    enum class Status
    {
        Running,
        Converged,
        IterationLimited
    };

    inline const char *statusName(Status s)
    {
        switch (s)
        {
        case Status::Converged:
            return "converged";
        case Status::IterationLimited:
            return "iteration-limited";
        default:
            return "running";
        }
    }

    struct InitialState
    {
        std::vector<SegmentState> segments;
        ConsensusState consensus;
        RhoState rho;
    };

    inline InitialState initState(const ProblemSpec &spec, const std::vector<SegmentMatrices> &mats)
    {
        const BasisConfig &cfg = spec.cfg;
        const int pieces = spec.pieces();
        const int m = cfg.dims;
        const int s = cfg.cont_orders;
        const int ms = cfg.stackSize();

        InitialState out;
        out.segments.resize(static_cast<std::size_t>(pieces));
        for (int i = 0; i < pieces; ++i)
        {
            const SegmentMatrices &mi = mats[static_cast<std::size_t>(i)];
            SegmentState &st = out.segments[static_cast<std::size_t>(i)];
            st.coeffs = Eigen::VectorXd::Zero(cfg.segmentVars());
            st.cont_dual = Eigen::VectorXd::Zero(2 * ms);
            st.slack = Eigen::VectorXd::Zero(mi.corridor.rows());
            st.corridor_dual = Eigen::VectorXd::Zero(mi.corridor.rows());
            st.vel_proj = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(mi.velocity.size()));
            st.vel_dual = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(mi.velocity.size()));
            if (spec.solver.mode == SolveMode::Numerical)
                st.multipliers = Eigen::VectorXd::Zero(
                    mi.corridor.rows() + static_cast<Eigen::Index>(mi.velocity.size()));
        }

        ConsensusState &cs = out.consensus;
        cs.points.assign(static_cast<std::size_t>(pieces) + 1, Eigen::VectorXd::Zero(ms));
        cs.fixed.assign(static_cast<std::size_t>(pieces) + 1, Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(ms, false));
        cs.single_sided = cs.fixed;
        for (int i = 1; i < pieces; ++i)
        {
            for (int d = 0; d < m; ++d)
            {
                cs.points[static_cast<std::size_t>(i)](d * s) = spec.path(i, d);
                if (spec.pin_waypoints)
                    cs.fixed[static_cast<std::size_t>(i)](d * s) = true;
            }
        }
        auto setBoundary = [&](const BoundaryCondition &bc, std::size_t idx)
        {
            for (int d = 0; d < m; ++d)
            {
                for (int r = 0; r < s; ++r)
                {
                    const int e = d * s + r;
                    if (r < bc.givenOrders())
                    {
                        cs.points[idx](e) = bc.values(r, d);
                        cs.fixed[idx](e) = true;
                    }
                    else if (bc.fill == FillPolicy::ZeroFixed)
                    {
                        cs.fixed[idx](e) = true;
                    }
                    else
                    {
                        cs.single_sided[idx](e) = true;
                    }
                }
            }
        };
        setBoundary(spec.start, 0);
        setBoundary(spec.end, static_cast<std::size_t>(pieces));

        const SolverConfig &sol = spec.solver;
        out.rho = RhoState{std::clamp(sol.rho0, sol.rho_min, sol.rho_max), sol.mu, sol.tau_incr, sol.tau_decr,
                           sol.rho_min, sol.rho_max, sol.adaptive_rho};
        return out;
    }

    // Factorization of 2Q~ + rho S, refreshed whenever rho changes.
    struct SegmentFactor
    {
        Eigen::LLT<Eigen::MatrixXd> llt;
        double rho = std::numeric_limits<double>::quiet_NaN();

        const Eigen::LLT<Eigen::MatrixXd> &get(const SegmentMatrices &mats, double r)
        {
            if (r != rho)
            {
                llt.compute(2.0 * mats.gram + r * mats.normal_sum);
                if (llt.info() != Eigen::Success)
                    throw NumericFailure("2Q + rho S is not positive definite");
                rho = r;
            }
            return llt;
        }
    };

    // Stationary point of the segment augmented Lagrangian:
    // (2Q~ + rho S) c = rho [M~'(z~ - u) + A°'(b° - s - v) + sum_j A^v_j'(phi_j - w_j)].
    inline Eigen::VectorXd closedFormSegmentUpdate(const SegmentState &st, const Eigen::VectorXd &zTilde,
                                                   const SegmentMatrices &mats, double rho, SegmentFactor &factor)
    {
        Eigen::VectorXd rhs = mats.boundary.transpose() * (zTilde - st.cont_dual);
        if (mats.corridor.rows() > 0)
            rhs.noalias() += mats.corridor.transpose() * (mats.corridor_offsets - st.slack - st.corridor_dual);
        for (std::size_t j = 0; j < mats.velocity.size(); ++j)
        {
            const auto col = static_cast<Eigen::Index>(j);
            rhs.noalias() += mats.velocity[j].transpose() * (st.vel_proj.col(col) - st.vel_dual.col(col));
        }
        rhs *= rho;
        return factor.get(mats, rho).solve(rhs);
    }

    inline Eigen::VectorXd closedFormSegmentUpdate(const SegmentState &st, const Eigen::VectorXd &zTilde,
                                                   const SegmentMatrices &mats, double rho)
    {
        SegmentFactor factor;
        return closedFormSegmentUpdate(st, zTilde, mats, rho, factor);
    }

    // Left and right derivative stacks of one segment.
    inline Eigen::VectorXd leftStack(const SegmentMatrices &mats, const Eigen::VectorXd &c)
    {
        return mats.boundary.topRows(mats.boundary.rows() / 2) * c;
    }

    inline Eigen::VectorXd rightStack(const SegmentMatrices &mats, const Eigen::VectorXd &c)
    {
        return mats.boundary.bottomRows(mats.boundary.rows() / 2) * c;
    }

    // Averages the two adjacent stacks at interior splits; boundary entries marked
    // single-sided copy their one neighbour. Fixed entries never change.
    inline void consensusPointUpdate(int point, const std::vector<Eigen::VectorXd> &coeffs,
                                     const std::vector<SegmentMatrices> &mats, ConsensusState &cs)
    {
        const int pieces = static_cast<int>(coeffs.size());
        const auto idx = static_cast<std::size_t>(point);
        Eigen::VectorXd target;
        const Eigen::Array<bool, Eigen::Dynamic, 1> *movable = nullptr;
        if (point == 0)
        {
            target = leftStack(mats[0], coeffs[0]);
            movable = &cs.single_sided[idx];
        }
        else if (point == pieces)
        {
            target = rightStack(mats[idx - 1], coeffs[idx - 1]);
            movable = &cs.single_sided[idx];
        }
        else
        {
            target = 0.5 * (rightStack(mats[idx - 1], coeffs[idx - 1]) + leftStack(mats[idx], coeffs[idx]));
        }
        Eigen::VectorXd &z = cs.points[idx];
        for (Eigen::Index e = 0; e < z.size(); ++e)
        {
            const bool moves = movable ? (*movable)(e) : !cs.fixed[idx](e);
            if (moves)
                z(e) = target(e);
        }
    }

    inline void consensusUpdate(const std::vector<Eigen::VectorXd> &coeffs, const std::vector<SegmentMatrices> &mats,
                                ConsensusState &cs)
    {
        for (int j = 0; j <= static_cast<int>(coeffs.size()); ++j)
            consensusPointUpdate(j, coeffs, mats, cs);
    }

    inline Eigen::VectorXd dualUpdateU(const Eigen::VectorXd &u, const Eigen::VectorXd &c,
                                       const Eigen::VectorXd &zTilde, const SegmentMatrices &mats)
    {
        return u + mats.boundary * c - zTilde;
    }

    inline Eigen::VectorXd slackProject(const Eigen::VectorXd &c, const Eigen::VectorXd &v, const SegmentMatrices &mats)
    {
        if (mats.corridor.rows() == 0)
            return Eigen::VectorXd();
        return (-(mats.corridor * c - mats.corridor_offsets + v)).cwiseMax(0.0);
    }

    inline Eigen::VectorXd dualUpdateV(const Eigen::VectorXd &v, const Eigen::VectorXd &c, const Eigen::VectorXd &s,
                                       const SegmentMatrices &mats)
    {
        if (mats.corridor.rows() == 0)
            return Eigen::VectorXd();
        return v + mats.corridor * c + s - mats.corridor_offsets;
    }

    // Euclidean projection onto the ball of radius vMax.
    inline Eigen::VectorXd ballProject(const Eigen::VectorXd &y, double vMax)
    {
        const double n2 = y.squaredNorm();
        if (n2 <= vMax * vMax)
            return y;
        return y * (vMax / std::sqrt(n2));
    }

    inline Eigen::VectorXd ballProject(const Eigen::VectorXd &c, const Eigen::VectorXd &w, const Eigen::MatrixXd &av,
                                       double vMax)
    {
        return ballProject(av * c + w, vMax);
    }

    inline Eigen::VectorXd dualUpdateW(const Eigen::VectorXd &w, const Eigen::VectorXd &c, const Eigen::VectorXd &phi,
                                       const Eigen::MatrixXd &av)
    {
        return w + av * c - phi;
    }

    // Stacked b~(T_i) c_i - b~(0) c_{i+1} over interior splits.
    inline Eigen::VectorXd spliceGaps(const std::vector<Eigen::VectorXd> &coeffs, const std::vector<SegmentMatrices> &mats)
    {
        const int pieces = static_cast<int>(coeffs.size());
        if (pieces < 2)
            return Eigen::VectorXd();
        const auto ms = mats[0].boundary.rows() / 2;
        Eigen::VectorXd out((pieces - 1) * ms);
        for (int i = 0; i + 1 < pieces; ++i)
        {
            const auto k = static_cast<std::size_t>(i);
            out.segment(i * ms, ms) = rightStack(mats[k], coeffs[k]) - leftStack(mats[k + 1], coeffs[k + 1]);
        }
        return out;
    }

    // Squared deviation of a segment's boundary stacks from the anchored (fixed)
    // consensus entries at its two ends.
    inline double anchorGapSquared(int i, const Eigen::VectorXd &c, const SegmentMatrices &mats, const ConsensusState &cs)
    {
        const auto k = static_cast<std::size_t>(i);
        const Eigen::VectorXd left = leftStack(mats, c) - cs.points[k];
        const Eigen::VectorXd right = rightStack(mats, c) - cs.points[k + 1];
        return cs.fixed[k].select(left, 0.0).squaredNorm() + cs.fixed[k + 1].select(right, 0.0).squaredNorm();
    }

    struct Residuals
    {
        double primal = 0.0;
        double dual = 0.0;
    };

    // Primal: splice gaps at interior splits plus deviations from anchored entries.
    // Dual: rho M~_i'(z~_i^{k+1} - z~_i^k) stacked over segments.
    inline Residuals residuals(const std::vector<Eigen::VectorXd> &coeffs, const ConsensusState &before,
                               const ConsensusState &after, double rho, const std::vector<SegmentMatrices> &mats)
    {
        const int pieces = static_cast<int>(coeffs.size());
        double p2 = 0.0, d2 = 0.0;
        for (int i = 0; i < pieces; ++i)
        {
            const auto k = static_cast<std::size_t>(i);
            if (i + 1 < pieces)
                p2 += (rightStack(mats[k], coeffs[k]) - leftStack(mats[k + 1], coeffs[k + 1])).squaredNorm();
            p2 += anchorGapSquared(i, coeffs[k], mats[k], after);
            d2 += (rho * (mats[k].boundary.transpose() * (after.pair(i) - before.pair(i)))).squaredNorm();
        }
        return {std::sqrt(p2), std::sqrt(d2)};
    }

    // Tolerance N * eps on both residual norms.
    inline Status stoppingCheck(double primal, double dual, int pieces, double eps, int iter, int maxIters)
    {
        const double tol = pieces * eps;
        if (primal * primal < tol * tol && dual * dual < tol * tol)
            return Status::Converged;
        if (iter >= maxIters)
            return Status::IterationLimited;
        return Status::Running;
    }

    // Residual balancing. Returns rho_old / rho_new, the factor every scaled dual
    // must be multiplied by.
    inline double updateRho(RhoState &st, double primal, double dual)
    {
        if (!st.adaptive)
            return 1.0;
        const double old = st.rho;
        double next = old;
        if (primal > st.mu * dual)
            next = old * st.tau_incr;
        else if (dual > st.mu * primal)
            next = old / st.tau_decr;
        next = std::clamp(next, st.min, st.max);
        st.rho = next;
        return old / next;
    }

    inline void rescaleDuals(SegmentState &st, double factor)
    {
        if (factor == 1.0)
            return;
        st.cont_dual *= factor;
        st.corridor_dual *= factor;
        st.vel_dual *= factor;
    }

    inline double objective(const std::vector<Eigen::VectorXd> &coeffs, const std::vector<SegmentMatrices> &mats)
    {
        double total = 0.0;
        for (std::size_t i = 0; i < coeffs.size(); ++i)
            total += coeffs[i].dot(mats[i].gram * coeffs[i]);
        return total;
    }

    struct OptimizeResult
    {
        Trajectory trajectory;
        ConsensusState consensus;
        std::vector<TraceRecord> trace;
        Status status = Status::Running;
        int iterations = 0;
        double primal = 0.0;
        double dual = 0.0;
        double objective = 0.0;
        double rho = 0.0;
    };

    // Consensus ADMM over the segments of one problem. One instance per run; it
    // is not meant to be shared between threads.
    //
    // The iteration runs on the problem rescaled to time units of
    // SolverConfig::time_scale (mean duration by default), which keeps the
    // derivative orders of the consensus stacks comparable in magnitude.
    // Residuals, the stopping test, the trace, and results are in the caller's
    // units.
    class Optimizer
    {
    public:
        using Observer = std::function<void(const TraceRecord &)>;

        explicit Optimizer(ProblemSpec spec)
            : spec_(std::move(spec)), exec_(spec_.solver.threads)
        {
            const ValidationReport rep = validateProblem(spec_);
            if (!rep.ok())
                throw InvalidProblem(rep);
            warnings_ = rep.warnings;

            const int pieces = spec_.pieces();
            const BasisConfig &cfg = spec_.cfg;
            scale_ = spec_.solver.time_scale > 0.0 ? spec_.solver.time_scale : spec_.totalDuration() / pieces;
            work_ = rescaleTime(spec_, scale_);

            // z_orig = z_work * scale^-r; c_orig = c_work * scale^-a.
            orderScale_.resize(2 * cfg.stackSize());
            for (int half = 0; half < 2; ++half)
                for (int d = 0; d < cfg.dims; ++d)
                    for (int r = 0; r < cfg.cont_orders; ++r)
                        orderScale_(half * cfg.stackSize() + d * cfg.cont_orders + r) = std::pow(scale_, -r);
            coeffScale_.resize(cfg.segmentVars());
            for (int d = 0; d < cfg.dims; ++d)
                for (int a = 0; a < cfg.coeffs(); ++a)
                    coeffScale_(d * cfg.coeffs() + a) = std::pow(scale_, -a);
            objectiveScale_ = std::pow(scale_, 1 - 2 * cfg.control_order);

            mats_.resize(static_cast<std::size_t>(pieces));
            exec_.forEach(pieces, [&](int i)
                          { mats_[static_cast<std::size_t>(i)] = buildSegmentMatrices(work_, i); });

            InitialState init = initState(work_, mats_);
            segs_ = std::move(init.segments);
            cs_ = std::move(init.consensus);
            rho_ = init.rho;

            factors_.resize(static_cast<std::size_t>(pieces));
            if (work_.solver.mode == SolveMode::Numerical)
            {
                constraints_.resize(static_cast<std::size_t>(pieces));
                for (int i = 0; i < pieces; ++i)
                    constraints_[static_cast<std::size_t>(i)] =
                        builtinConstraints(mats_[static_cast<std::size_t>(i)], work_.v_max);
            }
            coeffs_.assign(static_cast<std::size_t>(pieces), Eigen::VectorXd::Zero(cfg.segmentVars()));
            partObjective_.assign(static_cast<std::size_t>(pieces), 0.0);
            partCorridor_.assign(static_cast<std::size_t>(pieces), 0.0);
            partVelocity_.assign(static_cast<std::size_t>(pieces), 0.0);
            partPrimal_.assign(static_cast<std::size_t>(pieces), 0.0);
            partDual_.assign(static_cast<std::size_t>(pieces), 0.0);
        }

        // One full iteration. Returns the status after it.
        Status step()
        {
            if (iter_ == 0)
                clockStart_ = std::chrono::steady_clock::now();
            const int pieces = work_.pieces();
            const double rho = rho_.rho;
            const bool numeric = work_.solver.mode == SolveMode::Numerical;

            // Segment solves, projections, and constraint duals.
            exec_.forEach(pieces, [&](int i)
                          { segmentPhase(i, rho, numeric); });

            // Consensus at every split point.
            prevCs_ = cs_;
            exec_.forEach(pieces + 1, [&](int j)
                          { consensusPointUpdate(j, coeffs_, mats_, cs_); });

            // Continuity duals and residual partials.
            exec_.forEach(pieces, [&](int i)
                          { dualPhase(i, rho); });

            double p2 = 0.0, d2 = 0.0, obj = 0.0;
            double corr = -std::numeric_limits<double>::infinity();
            double vel = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < static_cast<std::size_t>(pieces); ++i)
            {
                p2 += partPrimal_[i];
                d2 += partDual_[i];
                obj += partObjective_[i];
                corr = std::max(corr, partCorridor_[i]);
                vel = std::max(vel, partVelocity_[i]);
            }
            ++iter_;
            if (!std::isfinite(p2) || !std::isfinite(d2))
                throw NumericFailure("non-finite residuals at iteration " + std::to_string(iter_));
            res_ = {std::sqrt(p2), std::sqrt(d2)};
            objective_ = obj * objectiveScale_;

            TraceRecord rec;
            rec.iter = iter_;
            rec.primal = res_.primal;
            rec.dual = res_.dual;
            rec.rho = rho;
            rec.objective = objective_;
            rec.max_corridor_violation = std::isfinite(corr) ? std::max(0.0, corr) : 0.0;
            rec.max_velocity_excess = std::isfinite(vel) ? std::max(0.0, vel / scale_) : 0.0;
            rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - clockStart_).count();
            trace_.push_back(rec);
            if (observer_)
                observer_(rec);

            status_ = stoppingCheck(res_.primal, res_.dual, pieces, work_.solver.epsilon, iter_, work_.solver.max_iters);
            if (status_ == Status::Running &&
                (work_.solver.rho_adapt_iters <= 0 || iter_ < work_.solver.rho_adapt_iters))
            {
                const double factor = updateRho(rho_, res_.primal, res_.dual);
                if (factor != 1.0)
                    exec_.forEach(pieces, [&](int i)
                                  { rescaleDuals(segs_[static_cast<std::size_t>(i)], factor); });
            }
            return status_;
        }

        OptimizeResult run()
        {
            while (step() == Status::Running)
            {
            }
            return result();
        }

        OptimizeResult result() const
        {
            OptimizeResult out;
            std::vector<double> durations;
            durations.reserve(spec_.segments.size());
            for (const auto &seg : spec_.segments)
                durations.push_back(seg.duration);
            std::vector<Eigen::VectorXd> coeffs;
            coeffs.reserve(coeffs_.size());
            for (const auto &c : coeffs_)
                coeffs.push_back(c.cwiseProduct(coeffScale_));
            out.trajectory = Trajectory(spec_.cfg.degree, spec_.cfg.dims, std::move(durations), std::move(coeffs));
            out.consensus = cs_;
            const auto ms = static_cast<Eigen::Index>(spec_.cfg.stackSize());
            for (auto &z : out.consensus.points)
                z = z.cwiseProduct(orderScale_.head(ms));
            out.trace = trace_;
            out.status = status_;
            out.iterations = iter_;
            out.primal = res_.primal;
            out.dual = res_.dual;
            out.objective = objective_;
            out.rho = rho_.rho;
            return out;
        }

        void setObserver(Observer obs) { observer_ = std::move(obs); }

        const ProblemSpec &spec() const { return spec_; }
        // Problem in the iteration's time units; states and matrices refer to it.
        const ProblemSpec &workingSpec() const { return work_; }
        double timeScale() const { return scale_; }
        const std::vector<SegmentMatrices> &matrices() const { return mats_; }
        const std::vector<SegmentState> &segments() const { return segs_; }
        const ConsensusState &consensus() const { return cs_; }
        const RhoState &rho() const { return rho_; }
        const std::vector<TraceRecord> &trace() const { return trace_; }
        const std::vector<Issue> &warnings() const { return warnings_; }
        int iterations() const { return iter_; }
        int workers() const { return exec_.workers(); }

    private:
        void segmentPhase(int i, double rho, bool numeric)
        {
            const auto k = static_cast<std::size_t>(i);
            SegmentState &st = segs_[k];
            const SegmentMatrices &mats = mats_[k];
            const Eigen::VectorXd zTilde = cs_.pair(i);

            if (numeric)
            {
                NumericUpdate up = numericSegmentUpdate(st.coeffs, zTilde, st.cont_dual, mats, constraints_[k],
                                                        st.multipliers, rho, work_.solver.inner);
                if (!up.coeffs.allFinite())
                    throw NumericFailure("inner solver diverged on segment " + std::to_string(i));
                st.coeffs = std::move(up.coeffs);
                st.multipliers = std::move(up.multipliers);
            }
            else
            {
                st.coeffs = closedFormSegmentUpdate(st, zTilde, mats, rho, factors_[k]);
                for (std::size_t j = 0; j < mats.velocity.size(); ++j)
                {
                    const auto col = static_cast<Eigen::Index>(j);
                    const Eigen::VectorXd w = st.vel_dual.col(col);
                    st.vel_proj.col(col) = ballProject(st.coeffs, w, mats.velocity[j], work_.v_max);
                    st.vel_dual.col(col) = dualUpdateW(w, st.coeffs, st.vel_proj.col(col), mats.velocity[j]);
                }
                if (mats.corridor.rows() > 0)
                {
                    st.slack = slackProject(st.coeffs, st.corridor_dual, mats);
                    st.corridor_dual = dualUpdateV(st.corridor_dual, st.coeffs, st.slack, mats);
                }
            }
            coeffs_[k] = st.coeffs;

            partObjective_[k] = st.coeffs.dot(mats.gram * st.coeffs);
            partCorridor_[k] = mats.corridor.rows() > 0
                                   ? (mats.corridor * st.coeffs - mats.corridor_offsets).maxCoeff()
                                   : -std::numeric_limits<double>::infinity();
            double vel = -std::numeric_limits<double>::infinity();
            for (const auto &av : mats.velocity)
                vel = std::max(vel, (av * st.coeffs).norm() - work_.v_max);
            partVelocity_[k] = vel;
        }

        void dualPhase(int i, double rho)
        {
            const auto k = static_cast<std::size_t>(i);
            SegmentState &st = segs_[k];
            const SegmentMatrices &mats = mats_[k];
            const Eigen::VectorXd zNew = cs_.pair(i);
            st.cont_dual = dualUpdateU(st.cont_dual, st.coeffs, zNew, mats);

            // Residual partials in the caller's units.
            const Eigen::Index ms = mats.boundary.rows() / 2;
            const Eigen::VectorXd stacks = (mats.boundary * st.coeffs - zNew).cwiseProduct(orderScale_);
            double p2 = cs_.fixed[k].select(stacks.head(ms), 0.0).squaredNorm() +
                        cs_.fixed[k + 1].select(stacks.tail(ms), 0.0).squaredNorm();
            if (i + 1 < work_.pieces())
                p2 += (rightStack(mats, st.coeffs) - leftStack(mats_[k + 1], coeffs_[k + 1]))
                          .cwiseProduct(orderScale_.head(ms))
                          .squaredNorm();
            partPrimal_[k] = p2;
            const Eigen::VectorXd dz = (zNew - prevCs_.pair(i)).cwiseProduct(orderScale_).cwiseProduct(orderScale_);
            partDual_[k] = (rho * coeffScale_.cwiseInverse().cwiseProduct(mats.boundary.transpose() * dz)).squaredNorm();
        }

        ProblemSpec spec_;
        ProblemSpec work_;
        Executor exec_;
        double scale_ = 1.0;
        double objectiveScale_ = 1.0;
        Eigen::VectorXd orderScale_, coeffScale_;
        std::vector<Issue> warnings_;
        std::vector<SegmentMatrices> mats_;
        std::vector<SegmentState> segs_;
        std::vector<SegmentFactor> factors_;
        std::vector<std::vector<ConvexConstraint>> constraints_;
        std::vector<Eigen::VectorXd> coeffs_;
        ConsensusState cs_, prevCs_;
        RhoState rho_;
        std::vector<double> partObjective_, partCorridor_, partVelocity_, partPrimal_, partDual_;
        std::vector<TraceRecord> trace_;
        Observer observer_;
        Residuals res_;
        double objective_ = 0.0;
        int iter_ = 0;
        Status status_ = Status::Running;
        std::chrono::steady_clock::time_point clockStart_;
    };

    inline OptimizeResult optimize(const ProblemSpec &spec, Optimizer::Observer observer = {})
    {
        Optimizer opt(spec);
        opt.setObserver(std::move(observer));
        return opt.run();
    }

} // namespace partraj
