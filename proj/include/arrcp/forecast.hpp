#pragma once

#include <optional>
#include <string>
#include <vector>

#include "arrcp/ets.hpp"
#include "arrcp/fit.hpp"
#include "arrcp/uncertainty.hpp"

namespace arrcp {

struct ForecastRecord {
  std::string area_id;
  Date origin{};  // last day of the fitting data
  int horizon = 0;
  Eigen::Vector3d imputed_x = Eigen::Vector3d::Zero();  // x1, x2, x3
  double imputed_u = 0.0;
  double v = 0.0;
  double offset = 0.0;
  double pred_count = 0.0;
  double pred_rate_100k = 0.0;
  std::optional<double> actual_rate_100k;
  std::optional<double> rmse_sim;  // per-100k scale
};

// Future model inputs for one area at a given origin, horizons 1..H.
struct ImputedInputs {
  std::vector<Eigen::Vector3d> x;  // per horizon
  std::vector<double> u;           // per horizon (weekly value of that day's week)
  double v = 0.0;
  double offset = 0.0;
};

// Covariates are forecast per area with ets_fit_forecast; the weekly sequence
// of intercept modes is forecast one week ahead (later weeks reuse it), and a
// future day falling inside the last fitted week reuses that week's mode. The
// slope mode is carried forward unchanged. `data` must end at `origin`: the
// caller slices first, which is what keeps future information out.
ImputedInputs impute_inputs(const FitResult& fit, const PanelDataset& data, int area,
                            Date origin, int max_horizon);

std::vector<ForecastRecord> predict_forward(const FitResult& fit, const PanelDataset& data,
                                            Date origin, const std::vector<int>& horizons);

struct RollingOriginResult {
  std::vector<ForecastRecord> records;
  std::vector<std::string> areas;
  std::vector<int> horizons;
  // realized per-100k RMSE, indexed [area][horizon position]; NaN when no
  // realized pair exists.
  std::vector<std::vector<double>> rmse;
  int origins_total = 0;
  int origins_failed = 0;
  std::vector<std::string> failures;
};

// Fits on data through each origin in [fit_window_end, eval_end - 1 day],
// forecasts the horizons, advances one day. refit_every = k re-estimates the
// parameters every k origins (k <= 0 means never after the first fit); in
// between, random-effect modes are still recomputed on the grown window.
// Aborts if more than 5% of origins fail.
RollingOriginResult rolling_origin_run(const PanelDataset& data, Date fit_window_end,
                                       Date eval_end, const std::vector<int>& horizons,
                                       int refit_every, std::uint64_t seed,
                                       int threads = 1);

struct ForecastRmse {
  std::vector<std::string> areas;
  std::vector<int> horizons;
  std::vector<std::vector<double>> rmse;  // [area][horizon position], per 100k
  int replicates_used = 0;
  std::vector<std::string> warnings;
};

// Parametric bootstrap of the forward prediction error at one origin: each
// replicate simulates future covariate paths from the per-area ETS fits, fresh
// weekly u* ~ N(0,1) and Poisson counts, and measures the pipeline prediction
// against that simulated truth.
ForecastRmse forecast_rmse_bootstrap(const FitResult& fit, const PanelDataset& data,
                                     Date origin, const std::vector<int>& horizons,
                                     const BootstrapConfig& cfg);

}  // namespace arrcp
