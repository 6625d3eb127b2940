#pragma once

// Subcommand bodies of the command-line tool. Each returns the process exit
// code and writes only to the streams and files it is given.

#include "partraj/admm.hpp"
#include "partraj/io.hpp"
#include "partraj/oracle.hpp"
#include "partraj/synthetic.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace partraj::cli
{

    constexpr int kExitConverged = 0;
    constexpr int kExitIterationLimited = 2;
    constexpr int kExitInvalidInput = 3;
    constexpr int kExitNumericFailure = 4;

    namespace detail
    {
        // Writes to `path`, or to `fallback` when the path is empty.
        inline bool emit(const std::string &path, const std::string &text, std::ostream &fallback, std::ostream &err)
        {
            if (path.empty())
            {
                fallback << text;
                return true;
            }
            std::ofstream f(path, std::ios::binary | std::ios::trunc);
            if (!f || !(f << text))
            {
                err << "error: cannot write " << path << "\n";
                return false;
            }
            return true;
        }

        inline void printWarnings(const std::vector<Issue> &warnings, std::ostream &err)
        {
            for (const auto &w : warnings)
                err << "warning: " << w.where << ": " << w.message << "\n";
        }
    } // namespace detail

    struct OptimizeArgs
    {
        std::string problem;
        std::optional<std::string> mode;
        std::optional<double> epsilon;
        std::optional<int> threads;
        std::optional<int> max_iters;
        std::string trace; // CSV path, optional
        std::string out;   // coefficients path; stdout when empty
    };

    inline int cmdOptimize(const OptimizeArgs &args, std::ostream &out, std::ostream &err)
    {
        ProblemSpec spec;
        try
        {
            spec = io::loadProblem(args.problem);
            if (args.mode)
                spec.solver.mode = io::parseMode(*args.mode);
            if (args.epsilon)
                spec.solver.epsilon = *args.epsilon;
            if (args.threads)
                spec.solver.threads = *args.threads;
            if (args.max_iters)
                spec.solver.max_iters = *args.max_iters;
        }
        catch (const io::ParseError &e)
        {
            err << "error: " << e.what() << "\n";
            return kExitInvalidInput;
        }

        std::ofstream trace;
        if (!args.trace.empty())
        {
            trace.open(args.trace, std::ios::trunc);
            if (!trace)
            {
                err << "error: cannot write " << args.trace << "\n";
                return kExitInvalidInput;
            }
            io::writeTraceHeader(trace);
            trace.flush();
        }

        OptimizeResult res;
        try
        {
            Optimizer opt(spec);
            detail::printWarnings(opt.warnings(), err);
            if (trace.is_open())
                opt.setObserver([&](const TraceRecord &rec)
                                {
                    io::writeTraceRow(trace, rec);
                    trace.flush(); });
            res = opt.run();
        }
        catch (const InvalidProblem &e)
        {
            err << e.what();
            return kExitInvalidInput;
        }
        catch (const NumericFailure &e)
        {
            err << "error: numeric failure: " << e.what() << "\n";
            return kExitNumericFailure;
        }

        if (!detail::emit(args.out, io::dumpBundle(io::bundleFrom(res)), out, err))
            return kExitInvalidInput;
        err << statusName(res.status) << " after " << res.iterations << " iterations; objective "
            << io::formatDouble(res.objective) << ", r_p " << io::formatDouble(res.primal) << ", r_d "
            << io::formatDouble(res.dual) << "\n";
        return res.status == Status::Converged ? kExitConverged : kExitIterationLimited;
    }

    // Global grid t_k = k dt, k = 0..floor(total/dt); splice points use the left segment.
    inline void writeSamples(const Trajectory &traj, double dt, std::ostream &os)
    {
        const int m = traj.dims();
        const char *groups[] = {"pos", "vel", "acc", "jerk"};
        os << "t";
        for (const char *g : groups)
            for (int d = 0; d < m; ++d)
                os << ',' << g << '_' << io::axisName(d, m);
        os << "\n";
        const double total = traj.totalDuration();
        const auto rows = static_cast<long long>(std::floor(total / dt * (1.0 + 1e-12))) + 1;
        for (long long k = 0; k < rows; ++k)
        {
            const double t = static_cast<double>(k) * dt;
            os << io::formatDouble(t);
            for (int r = 0; r < 4; ++r)
            {
                const Eigen::VectorXd v = traj.eval(t, r);
                for (int d = 0; d < m; ++d)
                    os << ',' << io::formatDouble(v(d));
            }
            os << "\n";
        }
    }

    inline int cmdSample(const std::string &coeffsPath, double dt, const std::string &outPath, std::ostream &out,
                         std::ostream &err)
    {
        io::ResultBundle b;
        try
        {
            b = io::loadBundle(coeffsPath);
        }
        catch (const io::ParseError &e)
        {
            err << "error: " << e.what() << "\n";
            return kExitInvalidInput;
        }
        const Trajectory traj = b.trajectory();
        if (!(dt > 0.0) || !std::isfinite(dt))
        {
            err << "error: --dt must be positive\n";
            return kExitInvalidInput;
        }
        if (dt > traj.totalDuration())
        {
            err << "error: --dt " << dt << " exceeds the total duration " << traj.totalDuration() << "\n";
            return kExitInvalidInput;
        }
        std::ostringstream os;
        writeSamples(traj, dt, os);
        return detail::emit(outPath, os.str(), out, err) ? 0 : kExitInvalidInput;
    }

    struct CheckReport
    {
        std::vector<Eigen::VectorXd> split_gaps; // per split: |jump| of each order 0..s-1
        Eigen::VectorXd start_gaps, end_gaps;    // |stack - given| for the supplied orders
        double max_splice_gap = 0.0;
        double primal = 0.0; // norm of all stacked splice jumps
        double tolerance = 0.0;
        bool tolerance_pass = true;
        double max_corridor_violation = 0.0;
        double max_velocity_excess = 0.0;
    };

    inline CheckReport checkTrajectory(const Trajectory &traj, const ProblemSpec &spec)
    {
        if (traj.pieces() != spec.pieces())
            throw std::invalid_argument("coefficients have " + std::to_string(traj.pieces()) +
                                        " segments, the problem has " + std::to_string(spec.pieces()));
        if (traj.dims() != spec.cfg.dims || traj.degree() != spec.cfg.degree)
            throw std::invalid_argument("coefficient shape does not match the problem");
        for (int i = 0; i < spec.pieces(); ++i)
            if (std::abs(traj.durations()[static_cast<std::size_t>(i)] - spec.segments[static_cast<std::size_t>(i)].duration) >
                1e-12 * std::max(1.0, spec.segments[static_cast<std::size_t>(i)].duration))
                throw std::invalid_argument("duration of segment " + std::to_string(i) + " differs from the problem");

        const int s = spec.cfg.cont_orders;
        CheckReport rep;
        double p2 = 0.0;
        for (int i = 0; i + 1 < traj.pieces(); ++i)
        {
            Eigen::VectorXd gaps(s);
            for (int r = 0; r < s; ++r)
            {
                const Eigen::VectorXd jump =
                    traj.evalLocal(i, traj.durations()[static_cast<std::size_t>(i)], r) - traj.evalLocal(i + 1, 0.0, r);
                gaps(r) = jump.norm();
                p2 += jump.squaredNorm();
            }
            rep.max_splice_gap = std::max(rep.max_splice_gap, gaps.maxCoeff());
            rep.split_gaps.push_back(gaps);
        }
        auto endGaps = [&](const BoundaryCondition &bc, int seg, double t)
        {
            Eigen::VectorXd g(bc.givenOrders());
            for (int r = 0; r < bc.givenOrders(); ++r)
                g(r) = (traj.evalLocal(seg, t, r) - bc.values.row(r).transpose()).norm();
            return g;
        };
        rep.start_gaps = endGaps(spec.start, 0, 0.0);
        rep.end_gaps = endGaps(spec.end, traj.pieces() - 1, traj.durations().back());
        rep.primal = std::sqrt(p2);
        rep.tolerance = spec.pieces() * spec.solver.epsilon;
        rep.tolerance_pass = p2 < rep.tolerance * rep.tolerance;

        for (int i = 0; i < spec.pieces(); ++i)
        {
            const SegmentSpec &seg = spec.segments[static_cast<std::size_t>(i)];
            const Eigen::VectorXd times = sampleTimes(seg.duration, seg.samples);
            for (Eigen::Index j = 0; j < times.size(); ++j)
            {
                if (!seg.polytope.empty())
                    rep.max_corridor_violation =
                        std::max(rep.max_corridor_violation, seg.polytope.violation(traj.evalLocal(i, times(j), 0)));
                if (spec.velocityLimited())
                    rep.max_velocity_excess =
                        std::max(rep.max_velocity_excess, traj.evalLocal(i, times(j), 1).norm() - spec.v_max);
            }
        }
        return rep;
    }

    inline io::Json checkJson(const CheckReport &rep)
    {
        io::Json j;
        j["splits"] = io::Json::array();
        for (std::size_t k = 0; k < rep.split_gaps.size(); ++k)
            j["splits"].push_back({{"index", k + 1}, {"gaps", io::detail::toJson(rep.split_gaps[k])}});
        j["boundary_gaps"] = {{"start", io::detail::toJson(rep.start_gaps)}, {"end", io::detail::toJson(rep.end_gaps)}};
        j["max_splice_gap"] = rep.max_splice_gap;
        j["primal_residual"] = rep.primal;
        j["tolerance"] = rep.tolerance;
        j["tolerance_pass"] = rep.tolerance_pass;
        j["max_corridor_violation"] = rep.max_corridor_violation;
        j["max_velocity_excess"] = rep.max_velocity_excess;
        return j;
    }

    inline int cmdCheck(const std::string &coeffsPath, const std::string &problemPath, std::ostream &out,
                        std::ostream &err)
    {
        try
        {
            const io::ResultBundle b = io::loadBundle(coeffsPath);
            const ProblemSpec spec = io::loadProblem(problemPath);
            const CheckReport rep = checkTrajectory(b.trajectory(), spec);
            out << checkJson(rep).dump(2) << "\n";
            return 0;
        }
        catch (const std::exception &e)
        {
            err << "error: " << e.what() << "\n";
            return kExitInvalidInput;
        }
    }

    struct BenchArgs
    {
        std::vector<int> counts{16, 64, 256};
        std::vector<int> threads{1};
        int repetitions = 1;
        std::uint64_t seed = 1;
        double epsilon = 0.05;
        int max_iters = 5000;
        std::string out;
    };

    struct BenchRow
    {
        int pieces = 0;
        int threads = 0;
        int rep = 0;
        std::string status;
        int iterations = 0;
        double total_ms = 0.0;
        double per_iter_ms = 0.0;
        double per_iter_seg_us = 0.0;
        double objective = 0.0;
    };

    inline BenchRow benchOnce(int pieces, int threads, int rep, std::uint64_t seed, double epsilon, int maxIters)
    {
        ProblemSpec spec = synthetic::randomCorridorInstance(seed, pieces);
        spec.solver.epsilon = epsilon;
        spec.solver.max_iters = maxIters;
        spec.solver.threads = threads;
        const auto t0 = std::chrono::steady_clock::now();
        const OptimizeResult res = optimize(spec);
        BenchRow row;
        row.total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        row.pieces = pieces;
        row.threads = threads;
        row.rep = rep;
        row.status = statusName(res.status);
        row.iterations = res.iterations;
        const double loopMs = res.trace.empty() ? 0.0 : res.trace.back().wall_ms;
        row.per_iter_ms = res.iterations ? loopMs / res.iterations : 0.0;
        row.per_iter_seg_us = 1000.0 * row.per_iter_ms / pieces;
        row.objective = res.objective;
        return row;
    }

    inline int cmdBench(const BenchArgs &args, std::ostream &out, std::ostream &err)
    {
        std::ostringstream os;
        os << "n,threads,rep,seed,status,iterations,total_ms,per_iter_ms,per_iter_seg_us,objective\n";
        try
        {
            for (int n : args.counts)
                for (int t : args.threads)
                    for (int r = 0; r < args.repetitions; ++r)
                    {
                        const BenchRow row = benchOnce(n, t, r, args.seed, args.epsilon, args.max_iters);
                        os << row.pieces << ',' << row.threads << ',' << row.rep << ',' << args.seed << ','
                           << row.status << ',' << row.iterations << ',' << io::formatDouble(row.total_ms) << ','
                           << io::formatDouble(row.per_iter_ms) << ',' << io::formatDouble(row.per_iter_seg_us)
                           << ',' << io::formatDouble(row.objective) << "\n";
                    }
        }
        catch (const std::exception &e)
        {
            err << "error: " << e.what() << "\n";
            return kExitInvalidInput;
        }
        return detail::emit(args.out, os.str(), out, err) ? 0 : kExitInvalidInput;
    }

    struct OracleArgs
    {
        std::string problem;
        std::string method = "auto"; // auto | kkt | active-set
        std::optional<bool> pins;
        std::string out;
    };

    inline int cmdOracle(const OracleArgs &args, std::ostream &out, std::ostream &err)
    {
        try
        {
            const ProblemSpec spec = io::loadProblem(args.problem);
            const bool pins = args.pins.value_or(spec.pin_waypoints);
            bool corridor = false;
            for (const auto &seg : spec.segments)
                corridor = corridor || !seg.polytope.empty();
            std::string method = args.method;
            if (method == "auto")
                method = corridor ? "active-set" : "kkt";
            if (method != "kkt" && method != "active-set")
            {
                err << "error: --method must be auto, kkt, or active-set\n";
                return kExitInvalidInput;
            }
            if (method == "kkt" && (corridor || spec.velocityLimited()))
                err << "warning: the kkt oracle ignores corridor and velocity limits\n";
            if (method == "active-set" && spec.velocityLimited())
                err << "warning: the active-set oracle ignores the velocity limit\n";

            const oracle::OracleResult res = method == "kkt" ? oracle::kktSolve(spec, pins) : oracle::activeSetQp(spec, pins);
            io::ResultBundle b;
            b.source = method == "kkt" ? "kkt-oracle" : "active-set-oracle";
            b.degree = spec.cfg.degree;
            b.dims = spec.cfg.dims;
            b.durations = res.trajectory.durations();
            b.coeffs = res.trajectory.coeffs();
            b.status = "exact";
            b.objective = res.objective;
            return detail::emit(args.out, io::dumpBundle(b), out, err) ? 0 : kExitInvalidInput;
        }
        catch (const oracle::OracleError &e)
        {
            err << "error: oracle refused: " << e.what() << "\n";
            return kExitInvalidInput;
        }
        catch (const io::ParseError &e)
        {
            err << "error: " << e.what() << "\n";
            return kExitInvalidInput;
        }
        catch (const InvalidProblem &e)
        {
            err << e.what();
            return kExitInvalidInput;
        }
    }

} // namespace partraj::cli
