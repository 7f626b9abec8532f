#pragma once

#include <string>
#include <vector>

#include "arrcp/rng.hpp"

namespace arrcp {

enum class EtsKind { Simple, Trend, DampedTrend };

// Additive-error exponential smoothing: level (simple), level+trend (Holt)
// and damped trend. No seasonality; smoothing parameters fit by least squares
// on one-step errors, model selected by AICc.
struct EtsModel {
  EtsKind kind = EtsKind::Simple;
  double alpha = 0.5;   // level smoothing, (0, 1]
  double beta = 0.0;    // trend smoothing
  double damping = 1.0; // damped-trend factor
  double level = 0.0;   // final state
  double trend = 0.0;
  double sse = 0.0;     // one-step in-sample squared error
  double aicc = 0.0;
  double sigma_e = 0.0; // one-step residual standard deviation
  int n = 0;

  std::vector<double> forecast(int horizon) const;  // iterates the state equation
};

const char* ets_kind_name(EtsKind k);

struct EtsForecast {
  EtsModel model;
  std::vector<double> mean;  // length h; floored at 0 for nonnegative inputs
};

// State recursion at fixed smoothing parameters (alpha = 1 on a simple model
// reduces to the naive forecast). Building block of the fit; also useful for
// evaluating a hand-chosen model.
EtsModel ets_run(EtsKind kind, double alpha, double beta, double damping,
                 const std::vector<double>& series);

// series length must be >= 3 with finite values.
EtsForecast ets_fit_forecast(const std::vector<double>& series, int horizon);

// One simulated future path: state recursion with N(0, sigma_e) innovations.
// Used by the forecast RMSE bootstrap.
std::vector<double> ets_simulate_path(const EtsModel& model, int horizon, Rng& rng,
                                      bool floor_at_zero);

}  // namespace arrcp
