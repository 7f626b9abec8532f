#pragma once

#include <utility>
#include <vector>

#include "arrcp/fit.hpp"

namespace arrcp {

// r = (y - mu_hat) / sqrt(mu_hat), conditional on the random-effect modes.
std::vector<double> pearson_residuals(const FitResult& fit, const PanelDataset& data);

struct CaicResult {
  double caic = 0.0;
  double cond_loglik = 0.0;  // Poisson log-likelihood at (beta, u, v) modes
  double edf = 0.0;          // trace of the penalized working-regression hat matrix
};

// cAIC = -2 * cond_loglik + 2 * edf. With sigma = phi = 0 the penalty term
// reduces to the fixed-parameter count and cAIC equals the GLM AIC.
CaicResult caic(const FitResult& fit, const PanelDataset& data);

// Sorted modes paired with standard-normal quantiles at (k - 0.5)/n.
struct QqData {
  std::vector<std::pair<double, double>> intercept;  // (theoretical, sample)
  std::vector<std::pair<double, double>> slope;
};

QqData qq_data(const RandomEffectState& re, const ModelSpec& spec);

struct DiagnosticsReport {
  std::vector<double> pearson;
  CaicResult caic;
  QqData qq;
  double share_within_band = 0.0;  // fraction of residuals in [-1.5, 1.5]
};

DiagnosticsReport diagnose(const FitResult& fit, const PanelDataset& data);

}  // namespace arrcp
