#pragma once

// Thin wrapper over the GSL Nelder-Mead simplex minimizer.

#include <functional>

#include <Eigen/Core>

namespace procimp::detail {

struct SimplexResult {
    Eigen::VectorXd x;
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
};

SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                          const Eigen::VectorXd& start, double step, int max_iter, double tol);

}  // namespace procimp::detail
