#include "arrcp/ets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace arrcp {

const char* ets_kind_name(EtsKind k) {
  switch (k) {
    case EtsKind::Simple: return "simple";
    case EtsKind::Trend: return "trend";
    case EtsKind::DampedTrend: return "damped-trend";
  }
  throw std::logic_error("unreachable");
}

namespace {

constexpr double kSseFloor = 1e-12;

int param_count(EtsKind k) {
  // smoothing parameters plus initial states
  switch (k) {
    case EtsKind::Simple: return 2;
    case EtsKind::Trend: return 4;
    case EtsKind::DampedTrend: return 5;
  }
  return 0;
}

}  // namespace

// One-step errors start at t = 1; initial level y[0], initial trend y[1]-y[0].
EtsModel ets_run(EtsKind kind, double alpha, double beta, double damping,
                 const std::vector<double>& y) {
  if (y.size() < 2) throw std::invalid_argument("ets_run needs a series of length >= 2");
  EtsModel m;
  m.kind = kind;
  m.alpha = alpha;
  m.beta = kind == EtsKind::Simple ? 0.0 : beta;
  m.damping = kind == EtsKind::DampedTrend ? damping : (kind == EtsKind::Trend ? 1.0 : 0.0);
  m.n = int(y.size());
  m.level = y[0];
  m.trend = kind == EtsKind::Simple ? 0.0 : y[1] - y[0];
  double sse = 0.0;
  for (size_t t = 1; t < y.size(); ++t) {
    double pred = m.level + m.damping * m.trend;
    double e = y[t] - pred;
    sse += e * e;
    m.level = pred + m.alpha * e;
    if (kind != EtsKind::Simple) m.trend = m.damping * m.trend + m.beta * e;
  }
  m.sse = sse;
  int n_e = m.n - 1;
  m.sigma_e = std::sqrt(std::max(sse, 0.0) / double(n_e));
  int k = param_count(kind);
  if (n_e - k - 1 > 0) {
    m.aicc = double(n_e) * std::log(std::max(sse, kSseFloor) / double(n_e)) + 2.0 * k +
             2.0 * double(k) * double(k + 1) / double(n_e - k - 1);
  } else {
    m.aicc = std::numeric_limits<double>::infinity();
  }
  return m;
}

namespace {

EtsModel fit_kind(EtsKind kind, const std::vector<double>& y) {
  double best_sse = std::numeric_limits<double>::infinity();
  double ba = 0.5, bb = 0.1, bd = 0.9;
  auto consider = [&](double a, double b, double d) {
    EtsModel m = ets_run(kind, a, b, d, y);
    if (m.sse < best_sse) {
      best_sse = m.sse;
      ba = a;
      bb = b;
      bd = d;
    }
  };
  // coarse grid, then two local refinements
  double step_a = 0.05, step_b = 0.05, step_d = 0.02;
  for (double a = 0.05; a <= 1.0 + 1e-12; a += step_a) {
    if (kind == EtsKind::Simple) {
      consider(a, 0, 0);
      continue;
    }
    for (double b = 0.0; b <= 1.0 + 1e-12; b += step_b) {
      if (kind == EtsKind::Trend) {
        consider(a, b, 1.0);
      } else {
        for (double d = 0.80; d <= 0.98 + 1e-12; d += step_d) consider(a, b, d);
      }
    }
  }
  for (int pass = 0; pass < 2; ++pass) {
    step_a /= 5;
    step_b /= 5;
    step_d /= 5;
    double a0 = ba, b0 = bb, d0 = bd;
    for (int ia = -4; ia <= 4; ++ia) {
      double a = std::clamp(a0 + ia * step_a, 1e-4, 1.0);
      if (kind == EtsKind::Simple) {
        consider(a, 0, 0);
        continue;
      }
      for (int ib = -4; ib <= 4; ++ib) {
        double b = std::clamp(b0 + ib * step_b, 0.0, 1.0);
        if (kind == EtsKind::Trend) {
          consider(a, b, 1.0);
        } else {
          for (int id = -4; id <= 4; ++id)
            consider(a, b, std::clamp(d0 + id * step_d, 0.5, 0.99));
        }
      }
    }
  }
  return ets_run(kind, ba, bb, bd, y);
}

}  // namespace

std::vector<double> EtsModel::forecast(int horizon) const {
  std::vector<double> out;
  out.reserve(size_t(horizon));
  double damp_sum = 0.0;
  for (int h = 1; h <= horizon; ++h) {
    if (kind == EtsKind::Simple) {
      out.push_back(level);
    } else {
      damp_sum += std::pow(damping, h);
      out.push_back(level + damp_sum * trend);
    }
  }
  return out;
}

EtsForecast ets_fit_forecast(const std::vector<double>& series, int horizon) {
  if (series.size() < 3)
    throw std::invalid_argument("ets_fit_forecast needs a series of length >= 3");
  for (double v : series)
    if (!std::isfinite(v)) throw std::invalid_argument("ets_fit_forecast: non-finite value");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");

  EtsForecast out;
  bool first = true;
  for (EtsKind kind : {EtsKind::Simple, EtsKind::Trend, EtsKind::DampedTrend}) {
    EtsModel m = fit_kind(kind, series);
    if (first || m.aicc < out.model.aicc) {
      out.model = m;
      first = false;
    }
  }
  out.mean = out.model.forecast(horizon);
  bool nonneg = *std::min_element(series.begin(), series.end()) >= 0.0;
  if (nonneg)
    for (double& v : out.mean) v = std::max(v, 0.0);
  return out;
}

std::vector<double> ets_simulate_path(const EtsModel& model, int horizon, Rng& rng,
                                      bool floor_at_zero) {
  std::vector<double> out;
  out.reserve(size_t(horizon));
  double l = model.level, b = model.trend;
  for (int h = 0; h < horizon; ++h) {
    double pred = l + model.damping * b;
    double e = model.sigma_e * rng.normal();
    double y = pred + e;
    l = pred + model.alpha * e;
    if (model.kind != EtsKind::Simple) b = model.damping * b + model.beta * e;
    out.push_back(floor_at_zero ? std::max(y, 0.0) : y);
  }
  return out;
}

}  // namespace arrcp
