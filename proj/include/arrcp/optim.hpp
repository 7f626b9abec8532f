#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

namespace arrcp {

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;

struct OptimOptions {
  double step_tol = 1e-6;  // parameter step inf-norm
  double f_tol = 1e-8;     // objective change
  int max_iter = 500;
};

struct OptimResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  int evals = 0;
  bool converged = false;
  std::string message;
};

Eigen::VectorXd numeric_gradient(const ObjectiveFn& fn, const Eigen::VectorXd& x,
                                 double rel_h = 1e-5, int* evals = nullptr);

// Quasi-Newton (BFGS) with central-difference gradients and Armijo backtracking.
OptimResult minimize_bfgs(const ObjectiveFn& fn, const Eigen::VectorXd& x0,
                          const OptimOptions& opt = {});

// Derivative-free Nelder-Mead with a deterministic initial simplex.
OptimResult minimize_nelder_mead(const ObjectiveFn& fn, const Eigen::VectorXd& x0,
                                 const OptimOptions& opt = {});

// Trust-region style damped Newton: finite-difference gradient and Hessian,
// Levenberg damping adapted by actual vs predicted decrease.
OptimResult minimize_damped_newton(const ObjectiveFn& fn, const Eigen::VectorXd& x0,
                                   const OptimOptions& opt = {});

OptimResult minimize_by_name(const std::string& name, const ObjectiveFn& fn,
                             const Eigen::VectorXd& x0, const OptimOptions& opt = {});

}  // namespace arrcp
