#pragma once

#include "partraj/basis.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace partraj
{

    // Convex polytope {x | normals * x <= offsets}. Zero rows means no corridor.
    struct Polytope
    {
        Eigen::MatrixXd normals;
        Eigen::VectorXd offsets;

        int faces() const { return static_cast<int>(normals.rows()); }
        bool empty() const { return normals.rows() == 0; }

        // Largest a_k^T x - b_k; -inf for an empty polytope.
        double violation(const Eigen::VectorXd &x) const
        {
            if (empty())
                return -std::numeric_limits<double>::infinity();
            return (normals * x - offsets).maxCoeff();
        }
    };

    struct SegmentSpec
    {
        double duration = 1.0;
        Polytope polytope;
        int samples = 8;
    };

    enum class FillPolicy
    {
        ZeroFixed,
        FreeSingleSided
    };

    // Derivative data at one trajectory end. Row r of `values` holds order r for
    // every dimension. Rows 0..p-1 are mandatory; any supplied row beyond that is
    // fixed as given. Orders not supplied follow `fill`.
    struct BoundaryCondition
    {
        Eigen::MatrixXd values;
        FillPolicy fill = FillPolicy::ZeroFixed;

        int givenOrders() const { return static_cast<int>(values.rows()); }
    };

    enum class SolveMode
    {
        ClosedForm,
        Numerical
    };

    struct InnerSolverOptions
    {
        int memory = 8;
        int max_iters = 200;
        double grad_tol = 1e-6;
    };

    struct SolverConfig
    {
        SolveMode mode = SolveMode::ClosedForm;
        double epsilon = 0.05;
        double rho0 = 1.0;
        double mu = 10.0;
        double tau_incr = 1.1;
        double tau_decr = 1.1;
        bool adaptive_rho = true;
        double rho_min = 1e-4;
        double rho_max = 1e8;
        int max_iters = 5000;
        // Iterations during which rho may adapt; 0 never freezes it.
        int rho_adapt_iters = 1000;
        int threads = 0; // 0: hardware concurrency
        // Reference duration the iteration runs in (t / time_scale). 0 picks the
        // mean segment duration; 1 iterates in the problem's own time units.
        double time_scale = 0.0;
        InnerSolverOptions inner;
    };

    struct ProblemSpec
    {
        BasisConfig cfg;
        Eigen::MatrixXd path; // (N+1) x m
        std::vector<SegmentSpec> segments;
        BoundaryCondition start;
        BoundaryCondition end;
        double v_max = std::numeric_limits<double>::infinity();
        Eigen::VectorXd weights; // empty: all ones
        SolverConfig solver;
        bool pin_waypoints = false;

        int pieces() const { return static_cast<int>(segments.size()); }
        bool velocityLimited() const { return std::isfinite(v_max); }

        Eigen::VectorXd effectiveWeights() const
        {
            return weights.size() == 0 ? Eigen::VectorXd::Ones(cfg.dims) : weights;
        }

        double totalDuration() const
        {
            double t = 0.0;
            for (const auto &seg : segments)
                t += seg.duration;
            return t;
        }
    };

    struct Issue
    {
        std::string where;
        std::string message;
    };

    struct ValidationReport
    {
        std::vector<Issue> fatal;
        std::vector<Issue> warnings;

        bool ok() const { return fatal.empty(); }

        std::string summary() const
        {
            std::ostringstream os;
            for (const auto &f : fatal)
                os << "error: " << f.where << ": " << f.message << "\n";
            for (const auto &w : warnings)
                os << "warning: " << w.where << ": " << w.message << "\n";
            return os.str();
        }
    };

    class InvalidProblem : public std::invalid_argument
    {
    public:
        explicit InvalidProblem(const ValidationReport &report)
            : std::invalid_argument(report.summary()), report_(report) {}
        const ValidationReport &report() const { return report_; }

    private:
        ValidationReport report_;
    };

    // Raised when a factorization or inner solve breaks down.
    class NumericFailure : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // Cached constant matrices of one segment.
    struct SegmentMatrices
    {
        Eigen::VectorXd times;              // sample times T_ij
        Eigen::MatrixXd gram;               // weighted Q~, m(D+1) square
        Eigen::MatrixXd boundary;           // M~ = [b~(0); b~(T)], 2ms x m(D+1); free end entries zeroed
        Eigen::MatrixXd corridor;           // A°, (M_s K) x m(D+1)
        Eigen::VectorXd corridor_offsets;   // b°
        std::vector<Eigen::MatrixXd> velocity; // A^v(T_ij), m x m(D+1) each
        Eigen::MatrixXd normal_sum;         // S = M~'M~ + A°'A° + sum A^v'A^v

        bool operator==(const SegmentMatrices &o) const
        {
            if (velocity.size() != o.velocity.size())
                return false;
            for (std::size_t j = 0; j < velocity.size(); ++j)
                if (velocity[j] != o.velocity[j])
                    return false;
            return times == o.times && gram == o.gram && boundary == o.boundary &&
                   corridor == o.corridor && corridor_offsets == o.corridor_offsets &&
                   normal_sum == o.normal_sum;
        }
    };

    // Uniform grid over [0, T] including both endpoints.
    inline Eigen::VectorXd sampleTimes(double duration, int count)
    {
        if (count < 2)
            throw std::invalid_argument("sample count must be >= 2");
        Eigen::VectorXd t(count);
        for (int j = 0; j < count; ++j)
            t(j) = duration * static_cast<double>(j) / static_cast<double>(count - 1);
        return t;
    }

    // One row per (sample, face), sample-major. Row = concat_dim a_{k,dim} b(T_ij)^T.
    inline std::pair<Eigen::MatrixXd, Eigen::VectorXd>
    corridorRows(const Polytope &poly, const Eigen::VectorXd &times, const BasisConfig &cfg)
    {
        const int n = cfg.coeffs();
        const int faces = poly.faces();
        const int rows = static_cast<int>(times.size()) * faces;
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, cfg.segmentVars());
        Eigen::VectorXd b(rows);
        for (int j = 0; j < times.size(); ++j)
        {
            const Eigen::RowVectorXd beta = basisRow(times(j), 0, cfg.degree).transpose();
            for (int k = 0; k < faces; ++k)
            {
                const int row = j * faces + k;
                for (int d = 0; d < cfg.dims; ++d)
                    a.block(row, d * n, 1, n) = poly.normals(k, d) * beta;
                b(row) = poly.offsets(k);
            }
        }
        return {a, b};
    }

    inline std::vector<Eigen::MatrixXd> velocityRows(const Eigen::VectorXd &times, const BasisConfig &cfg)
    {
        std::vector<Eigen::MatrixXd> out;
        out.reserve(times.size());
        for (int j = 0; j < times.size(); ++j)
            out.push_back(kronExpand(basisRow(times(j), 1, cfg.degree).transpose(), cfg.dims));
        return out;
    }

    // M~ with rows ordered as the segment's consensus pair (z_{i-1}; z_i).
    inline Eigen::MatrixXd segmentBoundaryMap(double duration, const BasisConfig &cfg)
    {
        const int ms = cfg.stackSize();
        Eigen::MatrixXd map(2 * ms, cfg.segmentVars());
        map.topRows(ms) = derivStack(0.0, cfg);
        map.bottomRows(ms) = derivStack(duration, cfg);
        return map;
    }

    inline SegmentMatrices buildSegmentMatrices(const ProblemSpec &spec, int i)
    {
        const BasisConfig &cfg = spec.cfg;
        const SegmentSpec &seg = spec.segments.at(static_cast<std::size_t>(i));
        SegmentMatrices mats;
        mats.times = sampleTimes(seg.duration, seg.samples);
        mats.gram = kronExpand(gramMatrix(seg.duration, cfg), spec.effectiveWeights());
        mats.boundary = segmentBoundaryMap(seg.duration, cfg);
        // Orders left free by a single-sided boundary carry no consensus term.
        const int ms = cfg.stackSize(), s = cfg.cont_orders;
        auto freeRows = [&](const BoundaryCondition &bc, int offset)
        {
            if (bc.fill != FillPolicy::FreeSingleSided)
                return;
            for (int d = 0; d < cfg.dims; ++d)
                for (int r = bc.givenOrders(); r < s; ++r)
                    mats.boundary.row(offset + d * s + r).setZero();
        };
        if (i == 0)
            freeRows(spec.start, 0);
        if (i + 1 == spec.pieces())
            freeRows(spec.end, ms);
        auto [a, b] = corridorRows(seg.polytope, mats.times, cfg);
        mats.corridor = std::move(a);
        mats.corridor_offsets = std::move(b);
        if (spec.velocityLimited())
            mats.velocity = velocityRows(mats.times, cfg);

        mats.normal_sum = mats.boundary.transpose() * mats.boundary;
        if (mats.corridor.rows() > 0)
            mats.normal_sum.noalias() += mats.corridor.transpose() * mats.corridor;
        for (const auto &av : mats.velocity)
            mats.normal_sum.noalias() += av.transpose() * av;
        return mats;
    }

    inline ValidationReport validateProblem(const ProblemSpec &spec)
    {
        ValidationReport rep;
        auto fatal = [&](std::string where, std::string msg)
        { rep.fatal.push_back({std::move(where), std::move(msg)}); };
        auto warn = [&](std::string where, std::string msg)
        { rep.warnings.push_back({std::move(where), std::move(msg)}); };

        const BasisConfig &cfg = spec.cfg;
        try
        {
            cfg.check();
        }
        catch (const std::invalid_argument &e)
        {
            fatal("config", e.what());
            return rep;
        }
        if (!cfg.canonicalDegree())
            warn("config", "degree " + std::to_string(cfg.degree) + " differs from 2p-1 = " +
                               std::to_string(2 * cfg.control_order - 1));
        if (2 * cfg.cont_orders < cfg.coeffs())
            warn("config", "2 * cont_orders < degree + 1; the boundary map is rank deficient");

        const int m = cfg.dims;
        const int pieces = spec.pieces();
        if (pieces < 1)
            fatal("segments", "at least one segment is required");
        if (spec.path.rows() != pieces + 1)
            fatal("path", "expected " + std::to_string(pieces + 1) + " waypoints, got " +
                              std::to_string(spec.path.rows()));
        if (spec.path.cols() != m)
            fatal("path", "waypoints must have " + std::to_string(m) + " components");
        if (!spec.path.allFinite())
            fatal("path", "non-finite waypoint entry");
        if (!(spec.v_max > 0.0))
            fatal("v_max", "must be positive");
        if (spec.weights.size() != 0)
        {
            if (spec.weights.size() != m)
                fatal("weights", "expected " + std::to_string(m) + " entries");
            else if (!(spec.weights.array() > 0.0).all())
                fatal("weights", "all weights must be positive");
        }

        for (int i = 0; i < pieces; ++i)
        {
            const std::string where = "segments[" + std::to_string(i) + "]";
            const SegmentSpec &seg = spec.segments[static_cast<std::size_t>(i)];
            if (!(seg.duration > 0.0) || !std::isfinite(seg.duration))
                fatal(where + ".duration", "must be positive and finite");
            if (seg.samples < 2)
                fatal(where + ".samples", "must be >= 2");
            const Polytope &poly = seg.polytope;
            if (poly.empty())
                continue;
            if (poly.normals.cols() != m)
                fatal(where + ".polytope.A", "normals must have " + std::to_string(m) + " columns");
            else if (poly.offsets.size() != poly.normals.rows())
                fatal(where + ".polytope.b", "offset count must match the number of normals");
            else
            {
                for (int k = 0; k < poly.faces(); ++k)
                    if (poly.normals.row(k).squaredNorm() == 0.0)
                        fatal(where + ".polytope.A[" + std::to_string(k) + "]", "zero normal");
                if (spec.path.rows() == pieces + 1 && spec.path.cols() == m)
                {
                    for (int e = 0; e < 2; ++e)
                    {
                        const Eigen::VectorXd pt = spec.path.row(i + e).transpose();
                        const double viol = poly.violation(pt);
                        if (viol > 1e-6)
                            warn(where + ".polytope", "path point " + std::to_string(i + e) +
                                                          " lies outside by " + std::to_string(viol));
                    }
                }
            }
        }

        auto checkBoundary = [&](const BoundaryCondition &bc, const std::string &where)
        {
            if (bc.values.cols() != m)
                fatal(where, "boundary values must have " + std::to_string(m) + " components");
            if (bc.givenOrders() < cfg.control_order)
                fatal(where, "orders 0.." + std::to_string(cfg.control_order - 1) + " are required");
            if (bc.givenOrders() > cfg.cont_orders)
                fatal(where, "more derivative orders than cont_orders");
            if (!bc.values.allFinite())
                fatal(where, "non-finite boundary value");
        };
        checkBoundary(spec.start, "boundary.start");
        checkBoundary(spec.end, "boundary.end");

        if (pieces >= 1)
        {
            // Count fixed equalities against coefficient freedom per dimension.
            auto fixedOrders = [&](const BoundaryCondition &bc)
            {
                return bc.fill == FillPolicy::ZeroFixed ? cfg.cont_orders : bc.givenOrders();
            };
            const int equalities = fixedOrders(spec.start) + fixedOrders(spec.end) +
                                   (pieces - 1) * cfg.cont_orders +
                                   (spec.pin_waypoints ? pieces - 1 : 0);
            if (equalities > pieces * cfg.coeffs())
                warn("boundary", "fixed boundary and continuity equalities (" + std::to_string(equalities) +
                                     ") exceed coefficients per dimension (" +
                                     std::to_string(pieces * cfg.coeffs()) +
                                     "); the fixed data must be mutually consistent or the iteration cannot settle");
        }

        const SolverConfig &sol = spec.solver;
        if (!(sol.epsilon > 0.0))
            fatal("solver.epsilon", "must be positive");
        if (!(sol.rho0 > 0.0))
            fatal("solver.rho0", "must be positive");
        if (!(sol.mu > 1.0))
            fatal("solver.mu", "must exceed 1");
        if (!(sol.tau_incr > 1.0) || !(sol.tau_decr > 1.0))
            fatal("solver.tau", "must exceed 1");
        if (!(sol.rho_min > 0.0) || !(sol.rho_min <= sol.rho_max))
            fatal("solver.rho_min", "need 0 < rho_min <= rho_max");
        if (sol.max_iters < 1)
            fatal("solver.max_iters", "must be >= 1");
        if (!(sol.time_scale >= 0.0) || !std::isfinite(sol.time_scale))
            fatal("solver.time_scale", "must be >= 0");
        if (sol.threads < 0)
            fatal("solver.threads", "must be >= 0");
        if (sol.inner.memory < 1 || sol.inner.max_iters < 1 || !(sol.inner.grad_tol > 0.0))
            fatal("solver.inner", "invalid inner solver options");
        return rep;
    }

    // The same problem in time units of `scale` seconds: durations / scale,
    // order-r boundary data * scale^r, v_max * scale. Positions are unchanged.
    inline ProblemSpec rescaleTime(const ProblemSpec &spec, double scale)
    {
        ProblemSpec out = spec;
        for (auto &seg : out.segments)
            seg.duration /= scale;
        for (BoundaryCondition *bc : {&out.start, &out.end})
            for (int r = 0; r < bc->givenOrders(); ++r)
                bc->values.row(r) *= std::pow(scale, r);
        out.v_max = spec.v_max * scale;
        out.solver.time_scale = 1.0;
        return out;
    }

} // namespace partraj
