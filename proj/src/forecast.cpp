#include "arrcp/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "arrcp/parallel.hpp"

namespace arrcp {

namespace {

void check_horizons(const std::vector<int>& horizons) {
  if (horizons.empty()) throw std::invalid_argument("no horizons requested");
  for (int h : horizons)
    if (h < 1 || h > 7)
      throw std::invalid_argument("horizon " + std::to_string(h) + " outside 1..7");
}

std::vector<double> area_series(const PanelDataset& d, const std::vector<double>& col,
                                int a) {
  std::vector<double> out(size_t(d.T));
  for (int t = 0; t < d.T; ++t) out[size_t(t)] = col[d.idx(a, t)];
  return out;
}

// Weekly intercept-mode sequence for one area, plus the week of its last entry.
struct WeeklyModes {
  std::vector<double> values;  // week-ascending
  std::map<int, double> by_week;
  int last_week = -1;
};

WeeklyModes weekly_modes(const ModelFrame& frame, const RandomEffectState& re, int area) {
  WeeklyModes out;
  for (int k : frame.u_of_area[size_t(area)]) {
    int week = frame.u_area_week[size_t(k)].second;
    out.values.push_back(re.u[k]);
    out.by_week[week] = re.u[k];
    out.last_week = std::max(out.last_week, week);
  }
  return out;
}

}  // namespace

ImputedInputs impute_inputs(const FitResult& fit, const PanelDataset& data, int area,
                            Date origin, int max_horizon) {
  if (area < 0 || area >= data.D()) throw std::invalid_argument("area index out of range");
  if (max_horizon < 1 || max_horizon > 7)
    throw std::invalid_argument("max_horizon outside 1..7");
  if (days_between(data.start, origin) < 0 || days_between(origin, data.day(data.T - 1)) < 0)
    throw std::invalid_argument("origin " + format_date(origin) + " outside the panel");

  // Slicing here is what makes post-origin data unreachable.
  const PanelDataset d = data.slice(data.start, origin);
  const ModelFrame frame = make_frame(d, fit.spec);
  if (frame.spec.random_intercept && int(fit.re_mode.u.size()) != frame.n_u)
    throw std::invalid_argument("fit random-effect modes do not match the panel window");

  ImputedInputs out;
  out.offset = d.offset[d.idx(area, d.T - 1)];
  out.v = fit.spec.random_slope ? fit.re_mode.v[area] : 0.0;

  EtsForecast f1 = ets_fit_forecast(area_series(d, d.x1, area), max_horizon);
  EtsForecast f2 = ets_fit_forecast(area_series(d, d.x2, area), max_horizon);
  EtsForecast f3 = ets_fit_forecast(area_series(d, d.x3, area), max_horizon);

  WeeklyModes wm;
  if (fit.spec.random_intercept) wm = weekly_modes(frame, fit.re_mode, area);

  out.x.resize(size_t(max_horizon));
  out.u.assign(size_t(max_horizon), 0.0);
  double u_ahead = 0.0;
  bool u_ahead_ready = false;
  for (int h = 1; h <= max_horizon; ++h) {
    out.x[size_t(h - 1)] = {f1.mean[size_t(h - 1)], f2.mean[size_t(h - 1)],
                            f3.mean[size_t(h - 1)]};
    if (!fit.spec.random_intercept) continue;
    int week = week_index(origin + std::chrono::days(h), d.week_origin);
    if (week <= wm.last_week) {
      out.u[size_t(h - 1)] = wm.by_week.at(week);
    } else {
      if (!u_ahead_ready) {
        u_ahead = ets_fit_forecast(wm.values, 1).mean[0];
        u_ahead_ready = true;
      }
      out.u[size_t(h - 1)] = u_ahead;  // weeks past the first also reuse it
    }
  }
  return out;
}

std::vector<ForecastRecord> predict_forward(const FitResult& fit, const PanelDataset& data,
                                            Date origin, const std::vector<int>& horizons) {
  check_horizons(horizons);
  int max_h = *std::max_element(horizons.begin(), horizons.end());

  std::vector<ForecastRecord> out;
  for (int a = 0; a < data.D(); ++a) {
    ImputedInputs inp = impute_inputs(fit, data, a, origin, max_h);
    for (int h : horizons) {
      const Eigen::Vector3d& x = inp.x[size_t(h - 1)];
      double eta = std::log(inp.offset) + fit.params.beta[0] + fit.params.beta[1] * x[0] +
                   fit.params.beta[2] * x[1] + fit.params.beta[3] * x[2] +
                   fit.params.sigma * inp.u[size_t(h - 1)] +
                   fit.params.phi1 * inp.v * x[0];
      ForecastRecord rec;
      rec.area_id = data.areas[size_t(a)];
      rec.origin = origin;
      rec.horizon = h;
      rec.imputed_x = x;
      rec.imputed_u = inp.u[size_t(h - 1)];
      rec.v = inp.v;
      rec.offset = inp.offset;
      rec.pred_count = std::exp(eta);
      rec.pred_rate_100k = 1e5 * rec.pred_count / inp.offset;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

RollingOriginResult rolling_origin_run(const PanelDataset& data, Date fit_window_end,
                                       Date eval_end, const std::vector<int>& horizons,
                                       int refit_every, std::uint64_t seed, int /*threads*/) {
  check_horizons(horizons);
  if (days_between(fit_window_end, eval_end) < 1)
    throw std::invalid_argument("eval_end must be after fit_window_end");
  if (days_between(data.start, fit_window_end) < 0)
    throw std::invalid_argument("fit_window_end before panel start");

  RollingOriginResult out;
  out.areas = data.areas;
  out.horizons = horizons;
  out.origins_total = days_between(fit_window_end, eval_end);

  const ModelSpec spec;  // full model
  ParameterSet params;
  bool have_params = false;

  // The origins form one sequential pass: each refit warm-starts from the
  // previous parameters, so this loop is not parallelized.
  for (int k = 0; k < out.origins_total; ++k) {
    Date origin = fit_window_end + std::chrono::days(k);
    try {
      PanelDataset slice = data.slice(data.start, origin);
      ModelFrame frame = make_frame(slice, spec);
      if (!have_params) {
        FitResult first = fit(spec, slice, {"qn"}, seed);
        params = first.params;
        have_params = true;
      } else if (refit_every > 0 && k % refit_every == 0) {
        params = refit_warm(frame, params);
      }
      LaplaceResult lap = laplace_marginal_loglik(params, frame);

      FitResult current;
      current.spec = spec;
      current.params = params;
      current.re_mode = lap.mode.state;
      current.loglik = lap.value;
      current.seed = seed;

      std::vector<ForecastRecord> recs = predict_forward(current, slice, origin, horizons);
      for (auto& rec : recs) {
        int t = days_between(data.start, origin) + rec.horizon;
        if (t < data.T) {
          int a = int(std::find(data.areas.begin(), data.areas.end(), rec.area_id) -
                      data.areas.begin());
          size_t i = data.idx(a, t);
          rec.actual_rate_100k = 1e5 * data.y[i] / data.offset[i];
        }
        out.records.push_back(std::move(rec));
      }
    } catch (const std::exception& e) {
      ++out.origins_failed;
      out.failures.push_back(format_date(origin) + ": " + e.what());
    }
  }
  if (out.origins_failed > 0.05 * out.origins_total)
    throw std::runtime_error("rolling-origin run aborted: " +
                             std::to_string(out.origins_failed) + " of " +
                             std::to_string(out.origins_total) + " origins failed; first: " +
                             out.failures.front());

  out.rmse.assign(data.areas.size(), std::vector<double>(horizons.size(),
                                                         std::nan("")));
  std::vector<std::vector<double>> ss(data.areas.size(),
                                      std::vector<double>(horizons.size(), 0.0));
  std::vector<std::vector<int>> cnt(data.areas.size(),
                                    std::vector<int>(horizons.size(), 0));
  for (const auto& rec : out.records) {
    if (!rec.actual_rate_100k) continue;
    size_t a = size_t(std::find(data.areas.begin(), data.areas.end(), rec.area_id) -
                      data.areas.begin());
    size_t j = size_t(std::find(horizons.begin(), horizons.end(), rec.horizon) -
                      horizons.begin());
    double d = rec.pred_rate_100k - *rec.actual_rate_100k;
    ss[a][j] += d * d;
    ++cnt[a][j];
  }
  for (size_t a = 0; a < data.areas.size(); ++a)
    for (size_t j = 0; j < horizons.size(); ++j)
      if (cnt[a][j] > 0) out.rmse[a][j] = std::sqrt(ss[a][j] / double(cnt[a][j]));
  return out;
}

ForecastRmse forecast_rmse_bootstrap(const FitResult& fit, const PanelDataset& data,
                                     Date origin, const std::vector<int>& horizons,
                                     const BootstrapConfig& cfg) {
  check_horizons(horizons);
  cfg.validate();
  const int max_h = *std::max_element(horizons.begin(), horizons.end());
  const PanelDataset d = data.slice(data.start, origin);
  const ModelFrame frame = make_frame(d, fit.spec);
  const int D = d.D();

  // The pipeline prediction depends only on pre-origin data, so it is the
  // same in every replicate.
  std::vector<ForecastRecord> preds = predict_forward(fit, d, origin, horizons);
  auto pred_at = [&](int a, size_t j) {
    return preds[size_t(a) * horizons.size() + j].pred_rate_100k;
  };

  // Per-area generators for the simulated future: ETS models of the covariate
  // series and the (area, future week) layout for fresh u* draws.
  struct AreaGen {
    EtsModel x1, x2, x3;
    double offset = 0, v = 0;
    std::vector<int> week_of_h;      // global week per horizon 1..max_h
    std::vector<int> future_weeks;   // ascending, weeks beyond the fitted window
    std::map<int, double> fitted_u;  // weeks inside the fitted window keep their mode
  };
  std::vector<AreaGen> gens{size_t(D)};
  for (int a = 0; a < D; ++a) {
    AreaGen& g = gens[size_t(a)];
    g.x1 = ets_fit_forecast(area_series(d, d.x1, a), max_h).model;
    g.x2 = ets_fit_forecast(area_series(d, d.x2, a), max_h).model;
    g.x3 = ets_fit_forecast(area_series(d, d.x3, a), max_h).model;
    g.offset = d.offset[d.idx(a, d.T - 1)];
    g.v = fit.spec.random_slope ? fit.re_mode.v[a] : 0.0;
    WeeklyModes wm;
    if (fit.spec.random_intercept) wm = weekly_modes(frame, fit.re_mode, a);
    g.week_of_h.resize(size_t(max_h));
    for (int h = 1; h <= max_h; ++h) {
      int week = week_index(origin + std::chrono::days(h), d.week_origin);
      g.week_of_h[size_t(h - 1)] = week;
      if (!fit.spec.random_intercept) continue;
      if (week <= wm.last_week) {
        g.fitted_u[week] = wm.by_week.at(week);
      } else if (g.future_weeks.empty() || g.future_weeks.back() != week) {
        g.future_weeks.push_back(week);
      }
    }
  }

  const int B = cfg.B_forecast;
  std::vector<std::vector<double>> rep_sq{size_t(B)};
  parallel_for(B, cfg.threads, [&](int b) {
    Rng rng(cfg.seed, std::uint64_t(b) + 1);
    std::vector<double> sq(size_t(D) * horizons.size(), 0.0);
    for (int a = 0; a < D; ++a) {
      const AreaGen& g = gens[size_t(a)];
      std::vector<double> p1 = ets_simulate_path(g.x1, max_h, rng, true);
      std::vector<double> p2 = ets_simulate_path(g.x2, max_h, rng, true);
      std::vector<double> p3 = ets_simulate_path(g.x3, max_h, rng, true);
      std::map<int, double> u_star = g.fitted_u;
      for (int week : g.future_weeks) u_star[week] = rng.normal();
      for (size_t j = 0; j < horizons.size(); ++j) {
        int h = horizons[j];
        double u = fit.spec.random_intercept ? u_star.at(g.week_of_h[size_t(h - 1)]) : 0.0;
        double eta = std::log(g.offset) + fit.params.beta[0] +
                     fit.params.beta[1] * p1[size_t(h - 1)] +
                     fit.params.beta[2] * p2[size_t(h - 1)] +
                     fit.params.beta[3] * p3[size_t(h - 1)] + fit.params.sigma * u +
                     fit.params.phi1 * g.v * p1[size_t(h - 1)];
        double y_star = double(rng.poisson(std::exp(eta)));
        double true_rate = 1e5 * y_star / g.offset;
        double err = pred_at(a, j) - true_rate;
        sq[size_t(a) * horizons.size() + j] = err * err;
      }
    }
    rep_sq[size_t(b)] = std::move(sq);
  });

  ForecastRmse out;
  out.areas = d.areas;
  out.horizons = horizons;
  out.replicates_used = B;
  if (B < 30)
    out.warnings.push_back("B_forecast=" + std::to_string(B) +
                           ": RMSE estimate has high variance");
  out.rmse.assign(size_t(D), std::vector<double>(horizons.size(), 0.0));
  for (int b = 0; b < B; ++b)
    for (int a = 0; a < D; ++a)
      for (size_t j = 0; j < horizons.size(); ++j)
        out.rmse[size_t(a)][j] += rep_sq[size_t(b)][size_t(a) * horizons.size() + j];
  for (int a = 0; a < D; ++a)
    for (size_t j = 0; j < horizons.size(); ++j)
      out.rmse[size_t(a)][j] = std::sqrt(out.rmse[size_t(a)][j] / double(B));
  return out;
}

}  // namespace arrcp
