#pragma once

#include "partraj/basis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace partraj
{

    // Piecewise polynomial in local segment time. Each coefficient vector is the
    // dimension-major squeeze (c_x; c_y; ...), ascending powers within a block.
    class Trajectory
    {
    public:
        Trajectory() = default;

        Trajectory(int degree, int dims, std::vector<double> durations, std::vector<Eigen::VectorXd> coeffs)
            : degree_(degree), dims_(dims), durations_(std::move(durations)), coeffs_(std::move(coeffs))
        {
            if (durations_.size() != coeffs_.size())
                throw std::invalid_argument("durations and coefficient blocks differ in count");
            for (std::size_t i = 0; i < coeffs_.size(); ++i)
            {
                if (coeffs_[i].size() != dims_ * (degree_ + 1))
                    throw std::invalid_argument("segment " + std::to_string(i) + " has the wrong coefficient count");
                if (!(durations_[i] > 0.0))
                    throw std::invalid_argument("segment " + std::to_string(i) + " has a non-positive duration");
            }
        }

        int degree() const { return degree_; }
        int dims() const { return dims_; }
        int pieces() const { return static_cast<int>(coeffs_.size()); }
        const std::vector<double> &durations() const { return durations_; }
        const std::vector<Eigen::VectorXd> &coeffs() const { return coeffs_; }

        double totalDuration() const
        {
            double t = 0.0;
            for (double d : durations_)
                t += d;
            return t;
        }

        // Coefficients of dimension d of segment i.
        Eigen::VectorXd block(int i, int d) const
        {
            return coeffs_[static_cast<std::size_t>(i)].segment(d * (degree_ + 1), degree_ + 1);
        }

        // order-th derivative of segment i at local time t.
        Eigen::VectorXd evalLocal(int i, double t, int order) const
        {
            const Eigen::VectorXd beta = basisRow(t, order, degree_);
            Eigen::VectorXd out(dims_);
            for (int d = 0; d < dims_; ++d)
                out(d) = block(i, d).dot(beta);
            return out;
        }

        // Segment index and local time for global t; split points belong to the
        // segment on their left.
        std::pair<int, double> locate(double t) const
        {
            double start = 0.0;
            for (int i = 0; i < pieces(); ++i)
            {
                const double end = start + durations_[static_cast<std::size_t>(i)];
                if (t <= end || i + 1 == pieces())
                    return {i, std::min(std::max(t - start, 0.0), durations_[static_cast<std::size_t>(i)])};
                start = end;
            }
            throw std::logic_error("empty trajectory");
        }

        Eigen::VectorXd eval(double t, int order = 0) const
        {
            const auto [i, local] = locate(t);
            return evalLocal(i, local, order);
        }

    private:
        int degree_ = 5;
        int dims_ = 3;
        std::vector<double> durations_;
        std::vector<Eigen::VectorXd> coeffs_;
    };

} // namespace partraj
