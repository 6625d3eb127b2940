// Rest-to-rest move split in two pieces; prints the objective and midpoint.
#include "partraj/partraj.hpp"

#include <iostream>

int main()
{
    partraj::ProblemSpec spec;
    spec.cfg = {5, 3, 2, 5};
    spec.path.resize(3, 2);
    spec.path << 0, 0, 1, 0.5, 2, 0;
    spec.segments.resize(2);
    for (auto &seg : spec.segments)
        seg.duration = 1.0;
    spec.start.values = Eigen::MatrixXd::Zero(3, 2);
    spec.end.values = Eigen::MatrixXd::Zero(3, 2);
    spec.end.values.row(0) << 2, 0;
    spec.start.fill = spec.end.fill = partraj::FillPolicy::FreeSingleSided;
    spec.solver.epsilon = 1e-4;

    const partraj::OptimizeResult res = partraj::optimize(spec);
    std::cout << partraj::statusName(res.status) << " in " << res.iterations << " iterations, objective "
              << res.objective << "\n";
    std::cout << "p(1) = " << res.trajectory.eval(1.0).transpose() << "\n";
    return res.status == partraj::Status::Converged ? 0 : 1;
}
