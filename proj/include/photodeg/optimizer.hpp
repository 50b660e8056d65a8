#pragma once

// Quasi-Newton minimization with central finite-difference gradients.

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace photodeg {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct OptimizerOptions {
  int max_iterations = 500;
  double grad_tol = 1e-6;    // infinity norm of the gradient
  double step_tol = 1e-9;    // relative step size
  double fd_step = 1e-4;     // absolute step for finite differences
  bool keep_trace = true;
};

struct OptimizerResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double grad_inf = 0.0;
  int iterations = 0;
  long evaluations = 0;
  bool converged = false;
  std::string reason;
  std::vector<std::string> trace;
};

Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x, double h);

// Symmetric central-difference Hessian with per-coordinate steps.
Eigen::MatrixXd central_hessian(const Objective& f, const Eigen::VectorXd& x, const Eigen::VectorXd& steps);

// BFGS with an Armijo backtracking line search. Non-finite objective values
// are treated as +infinity (rejected trial points). If initial_inverse_hessian
// is empty the identity is used.
OptimizerResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const OptimizerOptions& options,
                              const Eigen::MatrixXd& initial_inverse_hessian = Eigen::MatrixXd());

}  // namespace photodeg
