#pragma once

// Ground-truth solvers for the coupled (unsplit) problem. Nothing here calls
// into the consensus engine; polynomial calculus and Gram integrals are local.

#include "partraj/problem.hpp"
#include "partraj/trajectory.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace partraj::oracle
{

    class OracleError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // Desk-scale limits.
    constexpr int kMaxKktPieces = 8;
    constexpr int kMaxActiveSetPieces = 3;
    constexpr int kMaxActiveSetRows = 20;

    struct OracleResult
    {
        Trajectory trajectory;
        double objective = 0.0;
        int active_rows = 0; // active-set oracle only
    };

    namespace detail
    {
        // d^r/dt^r t^a at t, by repeated multiplication.
        inline double monomialDerivative(int a, int r, double t)
        {
            if (r > a)
                return 0.0;
            double coef = 1.0;
            for (int k = a; k > a - r; --k)
                coef *= k;
            double pw = 1.0;
            for (int k = 0; k < a - r; ++k)
                pw *= t;
            return coef * pw;
        }

        // Gauss-Legendre rule on [-1, 1] via Newton iteration on P_n.
        inline void gaussLegendre(int n, Eigen::VectorXd &nodes, Eigen::VectorXd &weights)
        {
            nodes.resize(n);
            weights.resize(n);
            const double pi = std::acos(-1.0);
            for (int i = 0; i < n; ++i)
            {
                double x = std::cos(pi * (i + 0.75) / (n + 0.5));
                double dp = 1.0;
                for (int it = 0; it < 100; ++it)
                {
                    double p0 = 1.0, p1 = x;
                    for (int k = 2; k <= n; ++k)
                    {
                        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n * (x * p1 - p0) / (x * x - 1.0);
                    const double dx = p1 / dp;
                    x -= dx;
                    if (std::abs(dx) < 1e-16)
                        break;
                }
                nodes(i) = x;
                weights(i) = 2.0 / ((1.0 - x * x) * dp * dp);
            }
        }

        // int_0^T (d^p/dt^p t^a)(d^p/dt^p t^b) dt, exact for polynomials by quadrature.
        inline Eigen::MatrixXd effortGram(double duration, int degree, int order)
        {
            const int n = degree + 1;
            Eigen::VectorXd x, w;
            gaussLegendre(std::max(1, degree + 1), x, w);
            Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
            for (int q = 0; q < x.size(); ++q)
            {
                const double t = 0.5 * duration * (x(q) + 1.0);
                Eigen::VectorXd v(n);
                for (int a = 0; a < n; ++a)
                    v(a) = monomialDerivative(a, order, t);
                g += (0.5 * duration * w(q)) * v * v.transpose();
            }
            return g;
        }

        struct EqualitySystem
        {
            Eigen::MatrixXd hessian; // objective = 1/2 x' H x
            Eigen::MatrixXd a;
            Eigen::VectorXd b;
        };

        inline int varIndex(const BasisConfig &cfg, int seg, int dim, int a)
        {
            return (seg * cfg.dims + dim) * cfg.coeffs() + a;
        }

        inline EqualitySystem buildEqualities(const ProblemSpec &spec, bool pins)
        {
            const BasisConfig &cfg = spec.cfg;
            const int pieces = spec.pieces();
            const int n = cfg.coeffs();
            const int m = cfg.dims;
            const int s = cfg.cont_orders;
            const int vars = pieces * m * n;
            const Eigen::VectorXd weights = spec.weights.size() ? spec.weights : Eigen::VectorXd::Ones(m);

            EqualitySystem sys;
            sys.hessian = Eigen::MatrixXd::Zero(vars, vars);
            for (int i = 0; i < pieces; ++i)
            {
                const Eigen::MatrixXd g = effortGram(spec.segments[static_cast<std::size_t>(i)].duration,
                                                     cfg.degree, cfg.control_order);
                for (int d = 0; d < m; ++d)
                    sys.hessian.block(varIndex(cfg, i, d, 0), varIndex(cfg, i, d, 0), n, n) = 2.0 * weights(d) * g;
            }

            std::vector<Eigen::RowVectorXd> rows;
            std::vector<double> rhs;
            auto derivRow = [&](int seg, int dim, int order, double t)
            {
                Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(vars);
                for (int a = 0; a < n; ++a)
                    row(varIndex(cfg, seg, dim, a)) = monomialDerivative(a, order, t);
                return row;
            };

            auto boundary = [&](const BoundaryCondition &bc, int seg, double t)
            {
                for (int d = 0; d < m; ++d)
                {
                    for (int r = 0; r < s; ++r)
                    {
                        if (r < bc.givenOrders())
                        {
                            rows.push_back(derivRow(seg, d, r, t));
                            rhs.push_back(bc.values(r, d));
                        }
                        else if (bc.fill == FillPolicy::ZeroFixed)
                        {
                            rows.push_back(derivRow(seg, d, r, t));
                            rhs.push_back(0.0);
                        }
                    }
                }
            };
            boundary(spec.start, 0, 0.0);
            boundary(spec.end, pieces - 1, spec.segments.back().duration);

            for (int i = 0; i + 1 < pieces; ++i)
            {
                const double T = spec.segments[static_cast<std::size_t>(i)].duration;
                for (int d = 0; d < m; ++d)
                {
                    for (int r = 0; r < s; ++r)
                    {
                        rows.push_back(derivRow(i, d, r, T) - derivRow(i + 1, d, r, 0.0));
                        rhs.push_back(0.0);
                    }
                    if (pins)
                    {
                        rows.push_back(derivRow(i, d, 0, T));
                        rhs.push_back(spec.path(i + 1, d));
                    }
                }
            }

            sys.a.resize(static_cast<Eigen::Index>(rows.size()), vars);
            sys.b.resize(static_cast<Eigen::Index>(rows.size()));
            for (std::size_t k = 0; k < rows.size(); ++k)
            {
                sys.a.row(static_cast<Eigen::Index>(k)) = rows[k];
                sys.b(static_cast<Eigen::Index>(k)) = rhs[k];
            }
            return sys;
        }

        // Drops linearly dependent rows; throws if the dropped rows contradict the rest.
        inline void eliminateRedundantRows(Eigen::MatrixXd &a, Eigen::VectorXd &b)
        {
            if (a.rows() == 0)
                return;
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a.transpose());
            qr.setThreshold(1e-10);
            const Eigen::Index rank = qr.rank();
            if (rank == a.rows())
                return;
            const auto &perm = qr.colsPermutation().indices();
            std::vector<Eigen::Index> keep(perm.data(), perm.data() + rank);
            std::sort(keep.begin(), keep.end());
            Eigen::MatrixXd ak(rank, a.cols());
            Eigen::VectorXd bk(rank);
            for (Eigen::Index k = 0; k < rank; ++k)
            {
                ak.row(k) = a.row(keep[static_cast<std::size_t>(k)]);
                bk(k) = b(keep[static_cast<std::size_t>(k)]);
            }
            // Consistency of the full system at a particular solution of the kept rows.
            const Eigen::VectorXd x = ak.completeOrthogonalDecomposition().solve(bk);
            const double mismatch = (a * x - b).cwiseAbs().maxCoeff();
            if (mismatch > 1e-7 * std::max(1.0, b.cwiseAbs().maxCoeff()))
                throw OracleError("equality constraints are inconsistent (mismatch " + std::to_string(mismatch) + ")");
            a = std::move(ak);
            b = std::move(bk);
        }

        struct KktSolution
        {
            Eigen::VectorXd x;
            Eigen::VectorXd multipliers;
            bool ok = false;
        };

        // [H A'; A 0][x; l] = [0; b].
        inline KktSolution solveKkt(const Eigen::MatrixXd &h, const Eigen::MatrixXd &a, const Eigen::VectorXd &b)
        {
            const Eigen::Index nv = h.rows();
            const Eigen::Index nc = a.rows();
            Eigen::MatrixXd k = Eigen::MatrixXd::Zero(nv + nc, nv + nc);
            k.topLeftCorner(nv, nv) = h;
            k.topRightCorner(nv, nc) = a.transpose();
            k.bottomLeftCorner(nc, nv) = a;
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nv + nc);
            rhs.tail(nc) = b;
            Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
            lu.setThreshold(1e-12);
            KktSolution out;
            if (!lu.isInvertible())
                return out;
            const Eigen::VectorXd sol = lu.solve(rhs);
            if (!sol.allFinite() || (k * sol - rhs).norm() > 1e-8 * std::max(1.0, rhs.norm()))
                return out;
            out.x = sol.head(nv);
            out.multipliers = sol.tail(nc);
            out.ok = true;
            return out;
        }

        inline Trajectory toTrajectory(const ProblemSpec &spec, const Eigen::VectorXd &x)
        {
            const int per = spec.cfg.dims * spec.cfg.coeffs();
            std::vector<double> durations;
            std::vector<Eigen::VectorXd> coeffs;
            for (int i = 0; i < spec.pieces(); ++i)
            {
                durations.push_back(spec.segments[static_cast<std::size_t>(i)].duration);
                coeffs.push_back(x.segment(i * per, per));
            }
            return Trajectory(spec.cfg.degree, spec.cfg.dims, std::move(durations), std::move(coeffs));
        }

        // Corridor inequalities G x <= h at every segment sample, sample-major per segment.
        inline void corridorInequalities(const ProblemSpec &spec, Eigen::MatrixXd &g, Eigen::VectorXd &h)
        {
            const BasisConfig &cfg = spec.cfg;
            const int vars = spec.pieces() * cfg.dims * cfg.coeffs();
            std::vector<Eigen::RowVectorXd> rows;
            std::vector<double> rhs;
            for (int i = 0; i < spec.pieces(); ++i)
            {
                const SegmentSpec &seg = spec.segments[static_cast<std::size_t>(i)];
                for (int j = 0; j < seg.samples; ++j)
                {
                    const double t = seg.duration * j / (seg.samples - 1);
                    for (int k = 0; k < seg.polytope.faces(); ++k)
                    {
                        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(vars);
                        for (int d = 0; d < cfg.dims; ++d)
                            for (int a = 0; a < cfg.coeffs(); ++a)
                                row(varIndex(cfg, i, d, a)) = seg.polytope.normals(k, d) * monomialDerivative(a, 0, t);
                        rows.push_back(row);
                        rhs.push_back(seg.polytope.offsets(k));
                    }
                }
            }
            g.resize(static_cast<Eigen::Index>(rows.size()), vars);
            h.resize(static_cast<Eigen::Index>(rows.size()));
            for (std::size_t k = 0; k < rows.size(); ++k)
            {
                g.row(static_cast<Eigen::Index>(k)) = rows[k];
                h(static_cast<Eigen::Index>(k)) = rhs[k];
            }
        }

        // Calls fn(subset) for every k-subset of {0..n-1}; stops early when fn returns false.
        template <typename Fn>
        bool forEachSubset(int n, int k, Fn &&fn)
        {
            std::vector<int> idx(static_cast<std::size_t>(k));
            for (int i = 0; i < k; ++i)
                idx[static_cast<std::size_t>(i)] = i;
            while (true)
            {
                if (!fn(idx))
                    return false;
                int i = k - 1;
                while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i)
                    --i;
                if (i < 0)
                    return true;
                ++idx[static_cast<std::size_t>(i)];
                for (int j = i + 1; j < k; ++j)
                    idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j) - 1] + 1;
            }
        }
    } // namespace detail

    // Equality-constrained minimum-effort problem (boundary data, C^{s-1}
    // continuity, optional waypoint pins) solved as one dense KKT system.
    // Corridor and velocity limits are ignored.
    inline OracleResult kktSolve(const ProblemSpec &spec, bool pins)
    {
        const ValidationReport rep = validateProblem(spec);
        if (!rep.ok())
            throw InvalidProblem(rep);
        if (spec.pieces() > kMaxKktPieces)
            throw OracleError("kkt oracle is limited to " + std::to_string(kMaxKktPieces) + " segments, got " +
                              std::to_string(spec.pieces()));
        detail::EqualitySystem sys = detail::buildEqualities(spec, pins);
        detail::eliminateRedundantRows(sys.a, sys.b);
        const detail::KktSolution sol = detail::solveKkt(sys.hessian, sys.a, sys.b);
        if (!sol.ok)
            throw OracleError("KKT system is singular; the effort is not strictly convex on the feasible set");
        OracleResult out;
        out.trajectory = detail::toTrajectory(spec, sol.x);
        out.objective = 0.5 * sol.x.dot(sys.hessian * sol.x);
        return out;
    }

    // Brute-force active-set enumeration over the corridor rows (linear
    // inequalities only). Subsets are visited by increasing size and the search
    // stops at the first size holding a feasible candidate with nonnegative
    // multipliers.
    inline OracleResult activeSetQp(const ProblemSpec &spec, bool pins)
    {
        const ValidationReport rep = validateProblem(spec);
        if (!rep.ok())
            throw InvalidProblem(rep);
        if (spec.pieces() > kMaxActiveSetPieces)
            throw OracleError("active-set oracle is limited to " + std::to_string(kMaxActiveSetPieces) + " segments");
        detail::EqualitySystem sys = detail::buildEqualities(spec, pins);
        detail::eliminateRedundantRows(sys.a, sys.b);
        Eigen::MatrixXd g;
        Eigen::VectorXd h;
        detail::corridorInequalities(spec, g, h);
        const int rows = static_cast<int>(g.rows());
        if (rows > kMaxActiveSetRows)
            throw OracleError("active-set oracle is limited to " + std::to_string(kMaxActiveSetRows) +
                              " inequality rows, got " + std::to_string(rows));

        const double feasTol = 1e-10;
        const double dualTol = 1e-9;
        double best = std::numeric_limits<double>::infinity();
        Eigen::VectorXd bestX;
        int bestActive = 0;
        for (int size = 0; size <= rows && !std::isfinite(best); ++size)
        {
            detail::forEachSubset(rows, size, [&](const std::vector<int> &active)
                                  {
                Eigen::MatrixXd a(sys.a.rows() + size, sys.a.cols());
                Eigen::VectorXd b(sys.b.size() + size);
                a.topRows(sys.a.rows()) = sys.a;
                b.head(sys.b.size()) = sys.b;
                for (int k = 0; k < size; ++k)
                {
                    a.row(sys.a.rows() + k) = g.row(active[static_cast<std::size_t>(k)]);
                    b(sys.b.size() + k) = h(active[static_cast<std::size_t>(k)]);
                }
                const detail::KktSolution sol = detail::solveKkt(sys.hessian, a, b);
                if (!sol.ok)
                    return true;
                const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
                if (rows > 0 && (g * sol.x - h).maxCoeff() > feasTol * scale)
                    return true;
                if (size > 0 && sol.multipliers.tail(size).minCoeff() < -dualTol * std::max(1.0, sol.multipliers.cwiseAbs().maxCoeff()))
                    return true;
                const double obj = 0.5 * sol.x.dot(sys.hessian * sol.x);
                if (obj < best)
                {
                    best = obj;
                    bestX = sol.x;
                    bestActive = size;
                }
                return true; });
        }
        if (!std::isfinite(best))
            throw OracleError("no feasible active set; the instance is infeasible");
        OracleResult out;
        out.trajectory = detail::toTrajectory(spec, bestX);
        out.objective = best;
        out.active_rows = bestActive;
        return out;
    }

    // Minimum-jerk interpolant of one dimension: the unique quintic with the
    // given position, velocity, and acceleration at 0 and T. Ascending powers.
    inline Eigen::Matrix<double, 6, 1> quinticReference(double p0, double v0, double a0, double p1, double v1, double a1,
                                                        double duration)
    {
        if (!(duration > 0.0))
            throw std::invalid_argument("quintic reference needs a positive duration");
        const double t = duration, t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
        const double dp = p1 - p0;
        Eigen::Matrix<double, 6, 1> c;
        c(0) = p0;
        c(1) = v0;
        c(2) = 0.5 * a0;
        c(3) = (20.0 * dp - (8.0 * v1 + 12.0 * v0) * t - (3.0 * a0 - a1) * t2) / (2.0 * t3);
        c(4) = (-30.0 * dp + (14.0 * v1 + 16.0 * v0) * t + (3.0 * a0 - 2.0 * a1) * t2) / (2.0 * t4);
        c(5) = (12.0 * dp - 6.0 * (v1 + v0) * t + (a1 - a0) * t2) / (2.0 * t5);
        return c;
    }

    // Squeezed (dimension-major) quintic for m-vector boundary data.
    inline Eigen::VectorXd quinticReference(const Eigen::VectorXd &p0, const Eigen::VectorXd &v0,
                                            const Eigen::VectorXd &a0, const Eigen::VectorXd &p1,
                                            const Eigen::VectorXd &v1, const Eigen::VectorXd &a1, double duration)
    {
        const auto m = p0.size();
        Eigen::VectorXd out(6 * m);
        for (Eigen::Index d = 0; d < m; ++d)
            out.segment(6 * d, 6) = quinticReference(p0(d), v0(d), a0(d), p1(d), v1(d), a1(d), duration);
        return out;
    }

    struct ReferenceCurve
    {
        double duration = 0.0;
        std::function<Eigen::VectorXd(double)> position;
    };

    struct Similarity
    {
        double value = 0.0; // log10 of the summed absolute deviation
        double sum = 0.0;
        bool exact = false; // zero deviation; value is log10 of the floor
    };

    constexpr int kSimilaritySamples = 8192;
    constexpr double kSimilarityFloor = 1e-300;

    // log10 of sum_k sum_d |p_d(t_k) - p_ref_d(t_k)| over uniformly spaced t_k
    // covering [0, duration] inclusive.
    inline Similarity similarityMetric(const Trajectory &traj, const ReferenceCurve &ref,
                                       int samples = kSimilaritySamples)
    {
        const double total = traj.totalDuration();
        if (std::abs(total - ref.duration) > 1e-9 * std::max(1.0, total))
            throw std::invalid_argument("trajectory and reference durations differ");
        if (samples < 2)
            throw std::invalid_argument("need at least two samples");
        double sum = 0.0;
        for (int k = 0; k < samples; ++k)
        {
            const double t = total * k / (samples - 1);
            sum += (traj.eval(t) - ref.position(t)).cwiseAbs().sum();
        }
        Similarity out;
        out.sum = sum;
        out.exact = sum == 0.0;
        out.value = std::log10(std::max(sum, kSimilarityFloor));
        return out;
    }

} // namespace partraj::oracle
