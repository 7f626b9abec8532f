#pragma once

#include <string>
#include <vector>

#include "arrcp/fit.hpp"
#include "arrcp/rng.hpp"

namespace arrcp {

struct BootstrapConfig {
  int B_rmse = 1000;     // fit-period RMSE replicates
  int B1 = 1000;         // double-bootstrap outer replicates
  int B2 = 56;           // double-bootstrap inner replicates
  int B_forecast = 700;  // forecast RMSE replicates
  double alpha = 0.05;
  std::uint64_t seed = 0;
  int threads = 1;
  double max_failure_share = 0.10;

  void validate() const;  // throws on replicate counts < 2 or alpha outside (0,1)
};

// Fresh u*, v* ~ N(0,1) and y* ~ Poisson(exp(eta*)); covariates and offsets
// are copied from `data`.
PanelDataset simulate_from_fit(const FitResult& fit, const PanelDataset& data, Rng& rng);

// Low-level generator used by the bootstrap loops: replaces y in place and
// reports the realized true rate p* = exp(eta*)/offset per observation.
void simulate_counts(const ParameterSet& params, ModelFrame& frame, Rng& rng,
                     std::vector<double>* true_rate);

struct RmseTable {
  std::vector<double> rmse;      // per observation, rate scale
  std::vector<double> rel_rmse;  // rmse / fitted rate
  SummaryStats rel_summary;
  int replicates_used = 0;
  int replicates_failed = 0;
};

// Parametric bootstrap RMSE of the fitted rate predictor: simulate, refit,
// accumulate (p_hat* - p*)^2 over B_rmse replicates.
RmseTable bootstrap_rmse_fit(const FitResult& fit, const PanelDataset& data,
                             const BootstrapConfig& cfg);

struct CiTable {
  std::vector<std::string> names;
  std::vector<double> lower, estimate, upper;
  int outer_used = 0;
  int outer_failed = 0;
};

// Studentized t-percentile intervals: the outer bootstrap gives estimates and
// t statistics, each studentized by an inner-bootstrap standard error.
CiTable double_bootstrap_t_ci(const FitResult& fit, const PanelDataset& data,
                              const BootstrapConfig& cfg);

// Bootstrap test of H0: target variance parameter = 0, target in
// {"sigma", "phi1"}; the null model has the term structurally removed.
double variance_pvalue(const FitResult& fit, const PanelDataset& data,
                       const BootstrapConfig& cfg, const std::string& target);

}  // namespace arrcp
