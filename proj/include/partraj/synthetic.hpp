#pragma once

// Reproducible problem instances for tests, benchmarks, and examples.

#include "partraj/basis.hpp"
#include "partraj/problem.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace partraj::synthetic
{

    // Draws come from raw 64-bit output; a seed gives the same instance on every
    // standard library.
    class Rng
    {
    public:
        explicit Rng(std::uint64_t seed) : gen_(seed) {}

        double uniform(double lo, double hi)
        {
            const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
            return lo + (hi - lo) * u;
        }

        int integer(int lo, int hi) // inclusive
        {
            return lo + static_cast<int>(gen_() % static_cast<std::uint64_t>(hi - lo + 1));
        }

        Eigen::VectorXd direction(int m)
        {
            Eigen::VectorXd v(m);
            do
            {
                for (int d = 0; d < m; ++d)
                    v(d) = uniform(-1.0, 1.0);
            } while (v.norm() < 1e-3 || v.norm() > 1.0);
            return v.normalized();
        }

    private:
        std::mt19937_64 gen_;
    };

    // Polynomial in ascending powers evaluated with its derivatives 0..orders-1.
    inline Eigen::VectorXd polyStack(const Eigen::VectorXd &poly, double t, int orders)
    {
        Eigen::VectorXd out(orders);
        for (int r = 0; r < orders; ++r)
            out(r) = poly.dot(basisRow(t, r, static_cast<int>(poly.size()) - 1));
        return out;
    }

    inline BoundaryCondition restBoundary(const Eigen::VectorXd &pos, int orders)
    {
        BoundaryCondition bc;
        bc.values = Eigen::MatrixXd::Zero(orders, pos.size());
        bc.values.row(0) = pos.transpose();
        return bc;
    }

    // The 1-D rest-to-rest quintic 10t^3 - 15t^4 + 6t^5 on [0, total], split into
    // `pieces` equal segments, with full-order boundary stacks (orders 0..s-1)
    // taken from the curve itself.
    inline ProblemSpec splitQuintic(int pieces, double total = 1.0)
    {
        ProblemSpec spec;
        spec.cfg = BasisConfig{5, 3, 1, 5};
        Eigen::VectorXd poly(6);
        poly << 0.0, 0.0, 0.0, 10.0, -15.0, 6.0;
        // Reparameterize t -> t / total.
        for (int a = 0; a < 6; ++a)
            poly(a) /= std::pow(total, a);
        spec.path.resize(pieces + 1, 1);
        for (int i = 0; i <= pieces; ++i)
            spec.path(i, 0) = polyStack(poly, total * i / pieces, 1)(0);
        spec.segments.assign(static_cast<std::size_t>(pieces), SegmentSpec{total / pieces, {}, 8});
        spec.start.values = polyStack(poly, 0.0, 5);
        spec.end.values = polyStack(poly, total, 5);
        return spec;
    }

    // Random walk through m-space with smooth random boundary data and no
    // inequality constraints. Boundary orders >= p are free.
    inline ProblemSpec randomEqualityInstance(std::uint64_t seed, int pieces, int dims = 3, bool pins = false)
    {
        Rng rng(seed);
        ProblemSpec spec;
        spec.cfg = BasisConfig{5, 3, dims, 5};
        spec.path.resize(pieces + 1, dims);
        spec.path.row(0).setZero();
        for (int i = 1; i <= pieces; ++i)
            spec.path.row(i) = spec.path.row(i - 1) + rng.uniform(0.5, 2.0) * rng.direction(dims).transpose();
        for (int i = 0; i < pieces; ++i)
            spec.segments.push_back(SegmentSpec{rng.uniform(0.6, 1.6), {}, 8});
        auto boundary = [&](int row)
        {
            BoundaryCondition bc;
            bc.values.resize(3, dims);
            bc.values.row(0) = spec.path.row(row);
            for (int d = 0; d < dims; ++d)
            {
                bc.values(1, d) = rng.uniform(-0.5, 0.5);
                bc.values(2, d) = rng.uniform(-0.5, 0.5);
            }
            bc.fill = FillPolicy::FreeSingleSided;
            return bc;
        };
        spec.start = boundary(0);
        spec.end = boundary(pieces);
        spec.pin_waypoints = pins;
        return spec;
    }

    // Zig-zag path with an axis-aligned box around every leg and a speed limit.
    // Waypoints are free (not pinned); the boxes force the trajectory to bend.
    // Durations follow the nominal speed, with the first and last legs
    // doubled for the rest-to-rest ends.
    inline ProblemSpec randomCorridorInstance(std::uint64_t seed, int pieces, int dims = 3, double margin = 0.25,
                                              double nominalSpeed = 1.0, double speedRatio = 1.6)
    {
        Rng rng(seed);
        ProblemSpec spec;
        spec.cfg = BasisConfig{5, 3, dims, 5};
        spec.path.resize(pieces + 1, dims);
        spec.path.row(0).setZero();
        Eigen::VectorXd heading = rng.direction(dims);
        for (int i = 1; i <= pieces; ++i)
        {
            Eigen::VectorXd dir = (heading + 1.2 * rng.direction(dims)).normalized();
            spec.path.row(i) = spec.path.row(i - 1) + rng.uniform(1.0, 2.0) * dir.transpose();
        }
        for (int i = 0; i < pieces; ++i)
        {
            const Eigen::VectorXd a = spec.path.row(i).transpose();
            const Eigen::VectorXd b = spec.path.row(i + 1).transpose();
            SegmentSpec seg;
            seg.duration = (b - a).norm() / nominalSpeed;
            if (i == 0 || i + 1 == pieces)
                seg.duration *= 2.0;
            seg.samples = 8;
            seg.polytope.normals.resize(2 * dims, dims);
            seg.polytope.offsets.resize(2 * dims);
            seg.polytope.normals.setZero();
            for (int d = 0; d < dims; ++d)
            {
                seg.polytope.normals(2 * d, d) = 1.0;
                seg.polytope.offsets(2 * d) = std::max(a(d), b(d)) + margin;
                seg.polytope.normals(2 * d + 1, d) = -1.0;
                seg.polytope.offsets(2 * d + 1) = -(std::min(a(d), b(d)) - margin);
            }
            spec.segments.push_back(seg);
        }
        spec.start = restBoundary(spec.path.row(0).transpose(), 3);
        spec.end = restBoundary(spec.path.row(pieces).transpose(), 3);
        spec.start.fill = spec.end.fill = FillPolicy::FreeSingleSided;
        spec.v_max = speedRatio * nominalSpeed;
        return spec;
    }

    // Planar instance whose legs are wrapped in slabs (two faces parallel to the
    // leg). Sized for the brute-force active-set oracle.
    inline ProblemSpec randomSlabInstance(std::uint64_t seed, int pieces, int samples, double halfWidth = 0.15)
    {
        Rng rng(seed);
        ProblemSpec spec;
        spec.cfg = BasisConfig{5, 3, 2, 5};
        spec.path.resize(pieces + 1, 2);
        spec.path.row(0).setZero();
        double angle = rng.uniform(-0.4, 0.4);
        for (int i = 1; i <= pieces; ++i)
        {
            angle += (i % 2 ? 1.0 : -1.0) * rng.uniform(0.6, 1.1);
            const double len = rng.uniform(1.0, 1.8);
            spec.path(i, 0) = spec.path(i - 1, 0) + len * std::cos(angle);
            spec.path(i, 1) = spec.path(i - 1, 1) + len * std::sin(angle);
        }
        for (int i = 0; i < pieces; ++i)
        {
            const Eigen::Vector2d a = spec.path.row(i).transpose();
            const Eigen::Vector2d b = spec.path.row(i + 1).transpose();
            const Eigen::Vector2d dir = (b - a).normalized();
            const Eigen::Vector2d nrm(-dir.y(), dir.x());
            SegmentSpec seg;
            seg.duration = (b - a).norm();
            seg.samples = samples;
            seg.polytope.normals.resize(2, 2);
            seg.polytope.offsets.resize(2);
            seg.polytope.normals.row(0) = nrm.transpose();
            seg.polytope.offsets(0) = nrm.dot(a) + halfWidth;
            seg.polytope.normals.row(1) = -nrm.transpose();
            seg.polytope.offsets(1) = -nrm.dot(a) + halfWidth;
            spec.segments.push_back(seg);
        }
        spec.start = restBoundary(spec.path.row(0).transpose(), 3);
        spec.end = restBoundary(spec.path.row(pieces).transpose(), 3);
        spec.start.fill = spec.end.fill = FillPolicy::FreeSingleSided;
        return spec;
    }

    // Planar Lissajous curve (sin(3 w t), sin(2 w t + pi/4)) with w = 2 pi / total.
    struct Lissajous
    {
        double total = 4.0;

        Eigen::VectorXd derivative(double t, int order) const
        {
            const double w = 2.0 * std::acos(-1.0) / total;
            auto wave = [&](double freq, double phase)
            {
                const double k = freq * w;
                // d^r/dt^r sin(k t + phase) = k^r sin(k t + phase + r pi/2)
                return std::pow(k, order) * std::sin(k * t + phase + order * 0.5 * std::acos(-1.0));
            };
            Eigen::VectorXd out(2);
            out << wave(3.0, 0.0), wave(2.0, 0.25 * std::acos(-1.0));
            return out;
        }

        Eigen::VectorXd position(double t) const { return derivative(t, 0); }
    };

    // Fit of the Lissajous curve with waypoints pinned at N+1 uniform times and
    // position, velocity, and acceleration given at both ends. Higher boundary
    // orders are left free: with C^4 splices and pins, fixing them as well would
    // overdetermine the fit.
    inline ProblemSpec lissajousFit(int pieces, const Lissajous &curve = {})
    {
        ProblemSpec spec;
        spec.cfg = BasisConfig{5, 3, 2, 5};
        spec.path.resize(pieces + 1, 2);
        for (int i = 0; i <= pieces; ++i)
            spec.path.row(i) = curve.position(curve.total * i / pieces).transpose();
        spec.segments.assign(static_cast<std::size_t>(pieces), SegmentSpec{curve.total / pieces, {}, 8});
        auto stack = [&](double t)
        {
            Eigen::MatrixXd v(3, 2);
            for (int r = 0; r < 3; ++r)
                v.row(r) = curve.derivative(t, r).transpose();
            return v;
        };
        spec.start.values = stack(0.0);
        spec.end.values = stack(curve.total);
        spec.start.fill = spec.end.fill = FillPolicy::FreeSingleSided;
        spec.pin_waypoints = true;
        return spec;
    }

} // namespace partraj::synthetic
