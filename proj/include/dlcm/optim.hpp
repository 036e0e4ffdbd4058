#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

namespace dlcm {

// Objective for minimisation: returns f(x) and fills *grad (always non-null).
// Non-finite returns are treated as out-of-domain by the line search.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct BfgsOptions {
    double gtol = 1e-8;        // stop when ||grad||_inf <= gtol
    double ftol = 0.0;         // optional: stop when |df| <= ftol * max(1,|f|)
    int max_iterations = 200;
    int max_evals = 2000;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    double initial_step = 1.0;
};

struct OptimResult {
    Eigen::VectorXd x;
    double f = 0.0;
    Eigen::VectorXd grad;
    int iterations = 0;
    int n_evals = 0;
    bool converged = false;
    std::string message;
};

// BFGS with a strong-Wolfe bracketing line search (cubic interpolation,
// bisection fallback). Deterministic for a deterministic objective.
OptimResult minimize_bfgs(const Objective& fn, const Eigen::VectorXd& x0,
                          const BfgsOptions& options = {});

// Central-difference gradient of a scalar function, step h_j = eps*max(1,|x_j|).
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double eps = 1e-6);

// Central-difference Hessian with one step of Richardson extrapolation.
// Base step h_j = eps*max(1,|x_j|).
Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                           const Eigen::VectorXd& x, double eps = 1e-4,
                           bool richardson = true);

}  // namespace dlcm
