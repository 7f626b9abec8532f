#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "arrcp/model.hpp"
#include "arrcp/optim.hpp"

namespace arrcp {

struct OptimizerRun {
  std::string name;
  bool success = false;
  ParameterSet params;
  double loglik = 0.0;
  int evals = 0;
  std::string message;
};

struct FitResult {
  ModelSpec spec;
  ParameterSet params;        // from the reference optimizer
  RandomEffectState re_mode;  // modes at the reference parameters
  double loglik = 0.0;        // Laplace marginal log-likelihood at the optimum
  std::string reference_optimizer;
  std::vector<OptimizerRun> per_optimizer;
  std::map<std::string, double> convergence_cv;  // golden-rule CV per free parameter
  std::vector<std::string> warnings;
  std::uint64_t seed = 0;
};

struct FitOptions {
  OptimOptions outer;        // step_tol 1e-6, f_tol 1e-8
  InnerOptions inner;
  double start_scale = 0.1;  // starting value of sigma and phi1
};

// Free-parameter names in natural scale, fixed order.
std::vector<std::string> free_parameter_names(const ModelSpec& spec);
std::vector<double> free_parameter_values(const ModelSpec& spec, const ParameterSet& p);

// Fixed-effects Poisson GLM (IRLS with offset); used as the warm start.
Eigen::Vector4d glm_poisson_start(const ModelFrame& frame);

// Maximize the Laplace marginal log-likelihood over (beta, log sigma, log phi1)
// with every requested optimizer from a common start; the reference result is
// the optimizer with the highest log-likelihood (ties break by list order).
FitResult fit(const ModelSpec& spec, const PanelDataset& data,
              const std::vector<std::string>& optimizers, std::uint64_t seed,
              const FitOptions& options = {});

// Single-optimizer refit warm-started at `start`; the cheap path used inside
// bootstrap loops.
ParameterSet refit_warm(const ModelFrame& frame, const ParameterSet& start,
                        const std::string& optimizer = "qn",
                        const FitOptions& options = {});

// CV_j = sd_j / mean_j over successful optimizer estimates (signed mean).
std::map<std::string, double> golden_rule_cv(const ModelSpec& spec,
                                             const std::vector<OptimizerRun>& runs);

struct FittedValues {
  std::vector<double> mu;         // plug-in mean per observation
  std::vector<double> rate;       // mu / offset
  std::vector<double> rate_100k;  // 100000 * mu / offset
};

FittedValues predict_fitted(const FitResult& fit, const PanelDataset& data);

// fit.json round trip; the frame is rebuilt from the panel when loading so
// random-effect modes are matched by (area, week).
void save_fit(const FitResult& fit, const PanelDataset& data, const std::string& path);
FitResult load_fit(const PanelDataset& data, const std::string& path);

}  // namespace arrcp
