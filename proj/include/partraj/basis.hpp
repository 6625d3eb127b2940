#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace partraj
{

    // Shape of the per-segment polynomial.
    //   degree         D, polynomial degree in local segment time
    //   control_order  p, derivative order whose squared integral is minimized
    //   dims           m, number of flat-output dimensions
    //   cont_orders    s, derivative orders 0..s-1 shared at splitting points
    struct BasisConfig
    {
        int degree = 5;
        int control_order = 3;
        int dims = 3;
        int cont_orders = 5;

        int coeffs() const { return degree + 1; }
        int stackSize() const { return dims * cont_orders; }
        int segmentVars() const { return dims * coeffs(); }

        // Throws std::invalid_argument on a structurally invalid shape.
        void check() const
        {
            if (dims < 1)
                throw std::invalid_argument("dims must be >= 1");
            if (control_order < 1 || control_order > degree)
                throw std::invalid_argument("control_order must lie in [1, degree]");
            if (cont_orders < 1 || cont_orders > degree)
                throw std::invalid_argument("cont_orders must lie in [1, degree]");
        }

        // The minimum-effort optimum is a polynomial of degree 2p-1.
        bool canonicalDegree() const { return degree == 2 * control_order - 1; }
    };

    // a! / (a-r)!, zero when r > a.
    inline double fallingFactorial(int a, int r)
    {
        if (r > a)
            return 0.0;
        double f = 1.0;
        for (int k = 0; k < r; ++k)
            f *= static_cast<double>(a - k);
        return f;
    }

    // r-th derivative of (1, t, ..., t^D) evaluated at t.
    inline Eigen::VectorXd basisRow(double t, int r, int degree)
    {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(degree + 1);
        for (int a = r; a <= degree; ++a)
            row(a) = fallingFactorial(a, r) * std::pow(t, a - r);
        return row;
    }

    // Q(T) = int_0^T b^(p)(t) b^(p)(t)^T dt, closed form.
    inline Eigen::MatrixXd gramMatrix(double duration, const BasisConfig &cfg)
    {
        if (!(duration > 0.0))
            throw std::invalid_argument("gram matrix needs a positive duration");
        const int n = cfg.coeffs();
        const int p = cfg.control_order;
        Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
        for (int a = p; a < n; ++a)
        {
            for (int b = a; b < n; ++b)
            {
                const int e = a + b - 2 * p + 1;
                const double v = fallingFactorial(a, p) * fallingFactorial(b, p) *
                                 std::pow(duration, e) / static_cast<double>(e);
                q(a, b) = v;
                q(b, a) = v;
            }
        }
        return q;
    }

    // Rows 0..s-1: derivative orders at t = 0; rows s..2s-1: the same at t = T.
    inline Eigen::MatrixXd boundaryMap(double duration, const BasisConfig &cfg)
    {
        if (!(duration > 0.0))
            throw std::invalid_argument("boundary map needs a positive duration");
        const int s = cfg.cont_orders;
        Eigen::MatrixXd map(2 * s, cfg.coeffs());
        for (int r = 0; r < s; ++r)
        {
            map.row(r) = basisRow(0.0, r, cfg.degree).transpose();
            map.row(s + r) = basisRow(duration, r, cfg.degree).transpose();
        }
        return map;
    }

    // I_m (x) (b^(0)(t), ..., b^(s-1)(t))^T. Applied to a squeezed coefficient
    // vector it yields the dimension-major derivative stack at t.
    inline Eigen::MatrixXd derivStack(double t, const BasisConfig &cfg)
    {
        const int s = cfg.cont_orders;
        const int n = cfg.coeffs();
        Eigen::MatrixXd block(s, n);
        for (int r = 0; r < s; ++r)
            block.row(r) = basisRow(t, r, cfg.degree).transpose();
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(cfg.dims * s, cfg.dims * n);
        for (int k = 0; k < cfg.dims; ++k)
            out.block(k * s, k * n, s, n) = block;
        return out;
    }

    // Block-diagonal matrix with m copies of x.
    inline Eigen::MatrixXd kronExpand(const Eigen::MatrixXd &x, int m)
    {
        if (m < 1)
            throw std::invalid_argument("kronExpand needs m >= 1");
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m * x.rows(), m * x.cols());
        for (int k = 0; k < m; ++k)
            out.block(k * x.rows(), k * x.cols(), x.rows(), x.cols()) = x;
        return out;
    }

    // Weighted variant: block k is weights(k) * x.
    inline Eigen::MatrixXd kronExpand(const Eigen::MatrixXd &x, const Eigen::VectorXd &weights)
    {
        const int m = static_cast<int>(weights.size());
        if (m < 1)
            throw std::invalid_argument("kronExpand needs at least one weight");
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m * x.rows(), m * x.cols());
        for (int k = 0; k < m; ++k)
        {
            if (!(weights(k) > 0.0))
                throw std::invalid_argument("kronExpand weight " + std::to_string(k) + " must be positive");
            out.block(k * x.rows(), k * x.cols(), x.rows(), x.cols()) = weights(k) * x;
        }
        return out;
    }

} // namespace partraj
