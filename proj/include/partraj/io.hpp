#pragma once

// Problem and result files (JSON) and the fixed-header CSV writers.

#include "partraj/admm.hpp"
#include "partraj/problem.hpp"
#include "partraj/trajectory.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace partraj::io
{

    using Json = nlohmann::json;

    // Malformed input; `where` is a path such as segments[2].polytope.A[0].
    class ParseError : public std::runtime_error
    {
    public:
        ParseError(const std::string &where, const std::string &what)
            : std::runtime_error(where + ": " + what), where_(where) {}
        const std::string &where() const { return where_; }

    private:
        std::string where_;
    };

    namespace detail
    {
        inline std::string child(const std::string &path, const std::string &key)
        {
            return path.empty() ? key : path + "." + key;
        }

        inline std::string index(const std::string &path, std::size_t i)
        {
            return path + "[" + std::to_string(i) + "]";
        }

        inline void expectObject(const Json &j, const std::string &path, std::initializer_list<const char *> keys)
        {
            if (!j.is_object())
                throw ParseError(path.empty() ? "<root>" : path, "expected an object");
            for (auto it = j.begin(); it != j.end(); ++it)
            {
                bool known = false;
                for (const char *k : keys)
                    known = known || it.key() == k;
                if (!known)
                    throw ParseError(child(path, it.key()), "unknown key");
            }
        }

        inline double number(const Json &j, const std::string &path)
        {
            if (j.is_null())
                return std::numeric_limits<double>::quiet_NaN();
            if (!j.is_number())
                throw ParseError(path, "expected a number");
            return j.get<double>();
        }

        inline int integer(const Json &j, const std::string &path)
        {
            if (!j.is_number_integer())
                throw ParseError(path, "expected an integer");
            return j.get<int>();
        }

        inline bool boolean(const Json &j, const std::string &path)
        {
            if (!j.is_boolean())
                throw ParseError(path, "expected true or false");
            return j.get<bool>();
        }

        inline std::string string(const Json &j, const std::string &path)
        {
            if (!j.is_string())
                throw ParseError(path, "expected a string");
            return j.get<std::string>();
        }

        inline Eigen::VectorXd vector(const Json &j, const std::string &path, Eigen::Index expected = -1)
        {
            if (!j.is_array())
                throw ParseError(path, "expected an array of numbers");
            if (expected >= 0 && static_cast<Eigen::Index>(j.size()) != expected)
                throw ParseError(path, "expected " + std::to_string(expected) + " entries, got " +
                                           std::to_string(j.size()));
            Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
            for (std::size_t i = 0; i < j.size(); ++i)
                v(static_cast<Eigen::Index>(i)) = number(j[i], index(path, i));
            return v;
        }

        // Rows of equal length; `cols` < 0 takes the first row's length.
        inline Eigen::MatrixXd matrix(const Json &j, const std::string &path, Eigen::Index cols = -1)
        {
            if (!j.is_array())
                throw ParseError(path, "expected an array of rows");
            Eigen::MatrixXd out;
            for (std::size_t i = 0; i < j.size(); ++i)
            {
                const Eigen::VectorXd row = vector(j[i], index(path, i), cols);
                if (i == 0)
                {
                    cols = row.size();
                    out.resize(static_cast<Eigen::Index>(j.size()), cols);
                }
                out.row(static_cast<Eigen::Index>(i)) = row.transpose();
            }
            if (j.empty())
                out.resize(0, std::max<Eigen::Index>(cols, 0));
            return out;
        }

        inline Json toJson(double x)
        {
            return std::isfinite(x) ? Json(x) : Json(nullptr);
        }

        inline Json toJson(const Eigen::VectorXd &v)
        {
            Json a = Json::array();
            for (Eigen::Index i = 0; i < v.size(); ++i)
                a.push_back(toJson(v(i)));
            return a;
        }

        inline Json toJson(const Eigen::MatrixXd &m)
        {
            Json a = Json::array();
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                a.push_back(toJson(Eigen::VectorXd(m.row(r).transpose())));
            return a;
        }

        constexpr const char *kOrderNames[] = {"pos", "vel", "acc", "jerk", "snap", "crackle", "pop"};
        constexpr int kNamedOrders = 7;

        inline FillPolicy fillPolicy(const std::string &s, const std::string &path)
        {
            if (s == "zero_fixed")
                return FillPolicy::ZeroFixed;
            if (s == "free_single_sided")
                return FillPolicy::FreeSingleSided;
            throw ParseError(path, "expected zero_fixed or free_single_sided, got '" + s + "'");
        }

        inline const char *fillName(FillPolicy f)
        {
            return f == FillPolicy::ZeroFixed ? "zero_fixed" : "free_single_sided";
        }

        inline BoundaryCondition boundary(const Json &j, const std::string &path, int dims)
        {
            expectObject(j, path, {"pos", "vel", "acc", "jerk", "snap", "crackle", "pop", "fill_policy"});
            BoundaryCondition bc;
            int orders = 0;
            while (orders < kNamedOrders && j.contains(kOrderNames[orders]))
                ++orders;
            for (int r = orders; r < kNamedOrders; ++r)
                if (j.contains(kOrderNames[r]))
                    throw ParseError(child(path, kOrderNames[r]),
                                     std::string("given without '") + kOrderNames[orders] + "'");
            bc.values.resize(orders, dims);
            for (int r = 0; r < orders; ++r)
                bc.values.row(r) = vector(j[kOrderNames[r]], child(path, kOrderNames[r]), dims).transpose();
            if (j.contains("fill_policy"))
                bc.fill = fillPolicy(string(j["fill_policy"], child(path, "fill_policy")), child(path, "fill_policy"));
            return bc;
        }

        inline Json boundaryJson(const BoundaryCondition &bc)
        {
            Json j = Json::object();
            for (int r = 0; r < bc.givenOrders() && r < kNamedOrders; ++r)
                j[kOrderNames[r]] = toJson(Eigen::VectorXd(bc.values.row(r).transpose()));
            j["fill_policy"] = fillName(bc.fill);
            return j;
        }

        inline SolveMode solveMode(const std::string &s, const std::string &path)
        {
            if (s == "closed-form")
                return SolveMode::ClosedForm;
            if (s == "numerical")
                return SolveMode::Numerical;
            throw ParseError(path, "expected closed-form or numerical, got '" + s + "'");
        }
    } // namespace detail

    inline const char *modeName(SolveMode m) { return m == SolveMode::ClosedForm ? "closed-form" : "numerical"; }

    inline SolveMode parseMode(const std::string &s) { return detail::solveMode(s, "--mode"); }

    // Shape only; value ranges (durations, v_max, ...) belong to validateProblem.
    inline ProblemSpec parseProblem(const Json &j)
    {
        using namespace detail;
        expectObject(j, "", {"dims", "degree", "control_order", "cont_orders", "v_max", "weights", "boundary", "path",
                             "segments", "solver"});
        ProblemSpec spec;
        if (j.contains("dims"))
            spec.cfg.dims = integer(j["dims"], "dims");
        if (j.contains("control_order"))
            spec.cfg.control_order = integer(j["control_order"], "control_order");
        spec.cfg.degree = 2 * spec.cfg.control_order - 1;
        if (j.contains("degree"))
            spec.cfg.degree = integer(j["degree"], "degree");
        spec.cfg.cont_orders = spec.cfg.degree;
        if (j.contains("cont_orders"))
            spec.cfg.cont_orders = integer(j["cont_orders"], "cont_orders");
        const int m = spec.cfg.dims;
        if (m < 1)
            throw ParseError("dims", "must be >= 1");

        if (j.contains("v_max"))
            spec.v_max = number(j["v_max"], "v_max");
        if (j.contains("weights"))
            spec.weights = vector(j["weights"], "weights", m);

        if (!j.contains("path"))
            throw ParseError("path", "missing");
        spec.path = matrix(j["path"], "path", m);

        if (!j.contains("segments") || !j["segments"].is_array())
            throw ParseError("segments", "expected an array");
        const Json &segs = j["segments"];
        for (std::size_t i = 0; i < segs.size(); ++i)
        {
            const std::string where = index("segments", i);
            expectObject(segs[i], where, {"duration", "polytope", "samples"});
            SegmentSpec seg;
            if (!segs[i].contains("duration"))
                throw ParseError(child(where, "duration"), "missing");
            seg.duration = number(segs[i]["duration"], child(where, "duration"));
            if (segs[i].contains("samples"))
                seg.samples = integer(segs[i]["samples"], child(where, "samples"));
            if (segs[i].contains("polytope"))
            {
                const std::string pw = child(where, "polytope");
                const Json &pj = segs[i]["polytope"];
                expectObject(pj, pw, {"A", "b"});
                if (!pj.contains("A") || !pj.contains("b"))
                    throw ParseError(pw, "needs both A and b");
                seg.polytope.normals = matrix(pj["A"], child(pw, "A"), m);
                seg.polytope.offsets = vector(pj["b"], child(pw, "b"), seg.polytope.normals.rows());
            }
            spec.segments.push_back(std::move(seg));
        }

        if (!j.contains("boundary"))
            throw ParseError("boundary", "missing");
        expectObject(j["boundary"], "boundary", {"start", "end"});
        if (!j["boundary"].contains("start") || !j["boundary"].contains("end"))
            throw ParseError("boundary", "needs both start and end");
        spec.start = boundary(j["boundary"]["start"], "boundary.start", m);
        spec.end = boundary(j["boundary"]["end"], "boundary.end", m);

        if (j.contains("solver"))
        {
            const Json &s = j["solver"];
            expectObject(s, "solver", {"mode", "epsilon", "rho0", "mu", "tau", "tau_incr", "tau_decr", "adaptive_rho",
                                       "rho_min", "rho_max", "rho_adapt_iters", "max_iters", "pin_waypoints",
                                       "threads", "time_scale", "inner"});
            SolverConfig &c = spec.solver;
            if (s.contains("mode"))
                c.mode = solveMode(string(s["mode"], "solver.mode"), "solver.mode");
            if (s.contains("epsilon"))
                c.epsilon = number(s["epsilon"], "solver.epsilon");
            if (s.contains("rho0"))
                c.rho0 = number(s["rho0"], "solver.rho0");
            if (s.contains("mu"))
                c.mu = number(s["mu"], "solver.mu");
            if (s.contains("tau"))
                c.tau_incr = c.tau_decr = number(s["tau"], "solver.tau");
            if (s.contains("tau_incr"))
                c.tau_incr = number(s["tau_incr"], "solver.tau_incr");
            if (s.contains("tau_decr"))
                c.tau_decr = number(s["tau_decr"], "solver.tau_decr");
            if (s.contains("adaptive_rho"))
                c.adaptive_rho = boolean(s["adaptive_rho"], "solver.adaptive_rho");
            if (s.contains("rho_min"))
                c.rho_min = number(s["rho_min"], "solver.rho_min");
            if (s.contains("rho_max"))
                c.rho_max = number(s["rho_max"], "solver.rho_max");
            if (s.contains("rho_adapt_iters"))
                c.rho_adapt_iters = integer(s["rho_adapt_iters"], "solver.rho_adapt_iters");
            if (s.contains("max_iters"))
                c.max_iters = integer(s["max_iters"], "solver.max_iters");
            if (s.contains("pin_waypoints"))
                spec.pin_waypoints = boolean(s["pin_waypoints"], "solver.pin_waypoints");
            if (s.contains("threads"))
                c.threads = integer(s["threads"], "solver.threads");
            if (s.contains("time_scale"))
                c.time_scale = number(s["time_scale"], "solver.time_scale");
            if (s.contains("inner"))
            {
                const Json &in = s["inner"];
                expectObject(in, "solver.inner", {"memory", "max_iters", "grad_tol"});
                if (in.contains("memory"))
                    c.inner.memory = integer(in["memory"], "solver.inner.memory");
                if (in.contains("max_iters"))
                    c.inner.max_iters = integer(in["max_iters"], "solver.inner.max_iters");
                if (in.contains("grad_tol"))
                    c.inner.grad_tol = number(in["grad_tol"], "solver.inner.grad_tol");
            }
        }
        return spec;
    }

    inline Json problemJson(const ProblemSpec &spec)
    {
        using detail::toJson;
        Json j;
        j["dims"] = spec.cfg.dims;
        j["degree"] = spec.cfg.degree;
        j["control_order"] = spec.cfg.control_order;
        j["cont_orders"] = spec.cfg.cont_orders;
        if (spec.velocityLimited())
            j["v_max"] = spec.v_max;
        if (spec.weights.size())
            j["weights"] = toJson(spec.weights);
        j["path"] = toJson(spec.path);
        j["segments"] = Json::array();
        for (const auto &seg : spec.segments)
        {
            Json s;
            s["duration"] = seg.duration;
            s["samples"] = seg.samples;
            if (!seg.polytope.empty())
                s["polytope"] = {{"A", toJson(seg.polytope.normals)}, {"b", toJson(seg.polytope.offsets)}};
            j["segments"].push_back(std::move(s));
        }
        j["boundary"] = {{"start", detail::boundaryJson(spec.start)}, {"end", detail::boundaryJson(spec.end)}};
        const SolverConfig &c = spec.solver;
        j["solver"] = {{"mode", modeName(c.mode)},
                       {"epsilon", c.epsilon},
                       {"rho0", c.rho0},
                       {"mu", c.mu},
                       {"tau_incr", c.tau_incr},
                       {"tau_decr", c.tau_decr},
                       {"adaptive_rho", c.adaptive_rho},
                       {"rho_min", c.rho_min},
                       {"rho_max", c.rho_max},
                       {"rho_adapt_iters", c.rho_adapt_iters},
                       {"max_iters", c.max_iters},
                       {"pin_waypoints", spec.pin_waypoints},
                       {"threads", c.threads},
                       {"time_scale", c.time_scale},
                       {"inner", {{"memory", c.inner.memory}, {"max_iters", c.inner.max_iters}, {"grad_tol", c.inner.grad_tol}}}};
        return j;
    }

    inline Json readJsonFile(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw ParseError(path, "cannot open file");
        try
        {
            return Json::parse(in);
        }
        catch (const Json::parse_error &e)
        {
            throw ParseError(path, std::string("invalid JSON: ") + e.what());
        }
    }

    inline ProblemSpec loadProblem(const std::string &path) { return parseProblem(readJsonFile(path)); }

    // Everything a run or an oracle produces, in the caller's units.
    struct ResultBundle
    {
        std::string source = "cadmm"; // cadmm | kkt-oracle | active-set-oracle
        int degree = 5;
        int dims = 3;
        std::vector<double> durations;
        std::vector<Eigen::VectorXd> coeffs; // dimension-major squeeze per segment
        std::string status;
        int iterations = 0;
        double primal = 0.0;
        double dual = 0.0;
        double objective = 0.0;
        double rho = 0.0;
        std::vector<TraceRecord> trace;

        Trajectory trajectory() const { return Trajectory(degree, dims, durations, coeffs); }
    };

    inline ResultBundle bundleFrom(const OptimizeResult &res)
    {
        ResultBundle b;
        b.degree = res.trajectory.degree();
        b.dims = res.trajectory.dims();
        b.durations = res.trajectory.durations();
        b.coeffs = res.trajectory.coeffs();
        b.status = statusName(res.status);
        b.iterations = res.iterations;
        b.primal = res.primal;
        b.dual = res.dual;
        b.objective = res.objective;
        b.rho = res.rho;
        b.trace = res.trace;
        return b;
    }

    constexpr const char *kTraceColumns[] = {"iter", "r_p", "r_d", "rho", "objective",
                                             "max_corridor_violation", "max_velocity_excess", "wall_ms"};

    inline Json bundleJson(const ResultBundle &b)
    {
        using detail::toJson;
        Json j;
        j["source"] = b.source;
        j["degree"] = b.degree;
        j["dims"] = b.dims;
        j["durations"] = Json::array();
        for (double d : b.durations)
            j["durations"].push_back(toJson(d));
        j["coefficients"] = Json::array();
        for (const auto &c : b.coeffs)
        {
            Json seg = Json::array();
            for (int d = 0; d < b.dims; ++d)
                seg.push_back(toJson(Eigen::VectorXd(c.segment(d * (b.degree + 1), b.degree + 1))));
            j["coefficients"].push_back(std::move(seg));
        }
        j["status"] = b.status;
        j["iterations"] = b.iterations;
        j["residuals"] = {{"primal", toJson(b.primal)}, {"dual", toJson(b.dual)}};
        j["objective"] = toJson(b.objective);
        j["rho"] = toJson(b.rho);
        Json rows = Json::array();
        for (const auto &t : b.trace)
            rows.push_back({t.iter, toJson(t.primal), toJson(t.dual), toJson(t.rho), toJson(t.objective),
                            toJson(t.max_corridor_violation), toJson(t.max_velocity_excess), toJson(t.wall_ms)});
        j["trace"] = {{"columns", kTraceColumns}, {"rows", std::move(rows)}};
        return j;
    }

    inline ResultBundle parseBundle(const Json &j)
    {
        using namespace detail;
        expectObject(j, "", {"source", "degree", "dims", "durations", "coefficients", "status", "iterations",
                             "residuals", "objective", "rho", "trace"});
        ResultBundle b;
        for (const char *key : {"degree", "dims", "durations", "coefficients"})
            if (!j.contains(key))
                throw ParseError(key, "missing");
        if (j.contains("source"))
            b.source = string(j["source"], "source");
        b.degree = integer(j["degree"], "degree");
        b.dims = integer(j["dims"], "dims");
        if (b.degree < 0 || b.dims < 1)
            throw ParseError("degree", "invalid shape");
        const Eigen::VectorXd durations = vector(j["durations"], "durations");
        b.durations.assign(durations.data(), durations.data() + durations.size());
        const Json &cj = j["coefficients"];
        if (!cj.is_array() || cj.size() != b.durations.size())
            throw ParseError("coefficients", "expected one entry per duration");
        for (std::size_t i = 0; i < cj.size(); ++i)
        {
            const Eigen::MatrixXd m = matrix(cj[i], index("coefficients", i), b.degree + 1);
            if (m.rows() != b.dims)
                throw ParseError(index("coefficients", i), "expected " + std::to_string(b.dims) + " rows");
            Eigen::VectorXd c(b.dims * (b.degree + 1));
            for (int d = 0; d < b.dims; ++d)
                c.segment(d * (b.degree + 1), b.degree + 1) = m.row(d).transpose();
            b.coeffs.push_back(std::move(c));
        }
        if (j.contains("status"))
            b.status = string(j["status"], "status");
        if (j.contains("iterations"))
            b.iterations = integer(j["iterations"], "iterations");
        if (j.contains("residuals"))
        {
            expectObject(j["residuals"], "residuals", {"primal", "dual"});
            if (j["residuals"].contains("primal"))
                b.primal = number(j["residuals"]["primal"], "residuals.primal");
            if (j["residuals"].contains("dual"))
                b.dual = number(j["residuals"]["dual"], "residuals.dual");
        }
        if (j.contains("objective"))
            b.objective = number(j["objective"], "objective");
        if (j.contains("rho"))
            b.rho = number(j["rho"], "rho");
        if (j.contains("trace"))
        {
            expectObject(j["trace"], "trace", {"columns", "rows"});
            const Json &rows = j["trace"].contains("rows") ? j["trace"]["rows"] : Json::array();
            for (std::size_t r = 0; r < rows.size(); ++r)
            {
                const std::string where = index("trace.rows", r);
                const Eigen::VectorXd v = vector(rows[r], where, 8);
                TraceRecord t;
                t.iter = integer(rows[r][0], index(where, 0));
                t.primal = v(1);
                t.dual = v(2);
                t.rho = v(3);
                t.objective = v(4);
                t.max_corridor_violation = v(5);
                t.max_velocity_excess = v(6);
                t.wall_ms = v(7);
                b.trace.push_back(t);
            }
        }
        try
        {
            (void)b.trajectory();
        }
        catch (const std::invalid_argument &e)
        {
            throw ParseError("coefficients", e.what());
        }
        return b;
    }

    inline std::string dumpBundle(const ResultBundle &b) { return bundleJson(b).dump(2) + "\n"; }

    inline ResultBundle loadBundle(const std::string &path) { return parseBundle(readJsonFile(path)); }

    // Shortest decimal text that parses back to the same double.
    inline std::string formatDouble(double x)
    {
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof(buf), x);
        return std::string(buf, res.ptr);
    }

    inline void writeTraceHeader(std::ostream &os)
    {
        for (int k = 0; k < 8; ++k)
            os << (k ? "," : "") << kTraceColumns[k];
        os << "\n";
    }

    inline void writeTraceRow(std::ostream &os, const TraceRecord &t)
    {
        os << t.iter << ',' << formatDouble(t.primal) << ',' << formatDouble(t.dual) << ',' << formatDouble(t.rho) << ','
           << formatDouble(t.objective) << ',' << formatDouble(t.max_corridor_violation) << ','
           << formatDouble(t.max_velocity_excess) << ',' << formatDouble(t.wall_ms) << "\n";
    }

    inline std::string axisName(int d, int dims)
    {
        static const char *names[] = {"x", "y", "z"};
        return dims <= 3 ? names[d] : "d" + std::to_string(d);
    }

} // namespace partraj::io
