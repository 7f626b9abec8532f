#include "arrcp/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "arrcp/parallel.hpp"

namespace arrcp {

void BootstrapConfig::validate() const {
  if (B_rmse < 2 || B1 < 2 || B2 < 2 || B_forecast < 2)
    throw std::invalid_argument("bootstrap replicate counts must be >= 2");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("alpha must lie strictly inside (0, 1)");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
}

void simulate_counts(const ParameterSet& params, ModelFrame& frame, Rng& rng,
                     std::vector<double>* true_rate) {
  RandomEffectState re = zero_state(frame);
  if (frame.spec.random_intercept)
    for (int k = 0; k < frame.n_u; ++k) re.u[k] = rng.normal();
  if (frame.spec.random_slope)
    for (int a = 0; a < frame.D; ++a) re.v[a] = rng.normal();
  if (true_rate) true_rate->resize(size_t(frame.n));
  for (int i = 0; i < frame.n; ++i) {
    double eta = linear_predictor(params, re, frame, i);
    double mu = std::exp(eta);
    frame.y[size_t(i)] = double(rng.poisson(mu));
    if (true_rate) (*true_rate)[size_t(i)] = mu / std::exp(frame.logoff[size_t(i)]);
  }
}

PanelDataset simulate_from_fit(const FitResult& fit, const PanelDataset& data, Rng& rng) {
  ModelFrame frame = make_frame(data, fit.spec);
  simulate_counts(fit.params, frame, rng, nullptr);
  PanelDataset out = data;
  for (size_t i = 0; i < out.y.size(); ++i) out.y[i] = frame.y[i];
  return out;
}

namespace {

// Fitted rate per observation at given params, mode found from scratch.
std::vector<double> fitted_rates(const ParameterSet& params, const ModelFrame& frame) {
  LaplaceResult lap = laplace_marginal_loglik(params, frame);
  std::vector<double> rate(size_t(frame.n));
  for (int i = 0; i < frame.n; ++i) {
    double eta = linear_predictor(params, lap.mode.state, frame, i);
    rate[size_t(i)] = std::exp(eta - frame.logoff[size_t(i)]);
  }
  return rate;
}

}  // namespace

RmseTable bootstrap_rmse_fit(const FitResult& fit, const PanelDataset& data,
                             const BootstrapConfig& cfg) {
  cfg.validate();
  const ModelFrame base = make_frame(data, fit.spec);
  FittedValues fv = predict_fitted(fit, data);

  const int B = cfg.B_rmse;
  const int chunk = 8;
  const int n_chunks = (B + chunk - 1) / chunk;
  std::vector<std::vector<double>> acc{size_t(n_chunks)};
  std::vector<int> used(size_t(n_chunks), 0), failed(size_t(n_chunks), 0);

  parallel_for(n_chunks, cfg.threads, [&](int c) {
    std::vector<double> sum(size_t(base.n), 0.0);
    ModelFrame frame = base;
    std::vector<double> p_true;
    for (int b = c * chunk; b < std::min(B, (c + 1) * chunk); ++b) {
      Rng rng(cfg.seed, std::uint64_t(b) + 1);
      simulate_counts(fit.params, frame, rng, &p_true);
      try {
        ParameterSet est = refit_warm(frame, fit.params);
        std::vector<double> p_hat = fitted_rates(est, frame);
        for (int i = 0; i < frame.n; ++i) {
          double d = p_hat[size_t(i)] - p_true[size_t(i)];
          sum[size_t(i)] += d * d;
        }
        ++used[size_t(c)];
      } catch (const std::exception&) {
        ++failed[size_t(c)];
      }
    }
    acc[size_t(c)] = std::move(sum);
  });

  RmseTable out;
  for (int c = 0; c < n_chunks; ++c) {
    out.replicates_used += used[size_t(c)];
    out.replicates_failed += failed[size_t(c)];
  }
  if (out.replicates_failed > cfg.max_failure_share * B)
    throw std::runtime_error("bootstrap aborted: " + std::to_string(out.replicates_failed) +
                             " of " + std::to_string(B) + " replicate refits failed");

  out.rmse.assign(size_t(base.n), 0.0);
  for (int c = 0; c < n_chunks; ++c)
    for (int i = 0; i < base.n; ++i) out.rmse[size_t(i)] += acc[size_t(c)][size_t(i)];
  out.rel_rmse.resize(size_t(base.n));
  for (int i = 0; i < base.n; ++i) {
    out.rmse[size_t(i)] = std::sqrt(out.rmse[size_t(i)] / double(out.replicates_used));
    out.rel_rmse[size_t(i)] = out.rmse[size_t(i)] / fv.rate[size_t(i)];
  }
  out.rel_summary = summarize(out.rel_rmse);
  return out;
}

CiTable double_bootstrap_t_ci(const FitResult& fit, const PanelDataset& data,
                              const BootstrapConfig& cfg) {
  cfg.validate();
  const ModelFrame base = make_frame(data, fit.spec);
  const auto names = free_parameter_names(fit.spec);
  const auto theta_hat = free_parameter_values(fit.spec, fit.params);
  const size_t p = names.size();
  const int B1 = cfg.B1, B2 = cfg.B2;

  struct OuterRep {
    bool ok = false;
    std::vector<double> theta, t;
  };
  std::vector<OuterRep> reps{size_t(B1)};

  parallel_for(B1, cfg.threads, [&](int b) {
    // substream layout: outer replicate b owns streams (b+1)<<20 .. +B2
    std::uint64_t stream0 = (std::uint64_t(b) + 1) << 20;
    ModelFrame frame = base;
    Rng rng(cfg.seed, stream0);
    simulate_counts(fit.params, frame, rng, nullptr);
    OuterRep rep;
    try {
      ParameterSet outer_est = refit_warm(frame, fit.params);
      rep.theta = free_parameter_values(fit.spec, outer_est);

      std::vector<std::vector<double>> inner;
      ModelFrame inner_frame = base;
      for (int c = 0; c < B2; ++c) {
        Rng inner_rng(cfg.seed, stream0 + std::uint64_t(c) + 1);
        simulate_counts(outer_est, inner_frame, inner_rng, nullptr);
        try {
          ParameterSet est = refit_warm(inner_frame, outer_est);
          inner.push_back(free_parameter_values(fit.spec, est));
        } catch (const std::exception&) {
        }
      }
      if (inner.size() < 2) return;  // cannot studentize this replicate

      rep.t.resize(p);
      for (size_t j = 0; j < p; ++j) {
        double mean = 0;
        for (const auto& e : inner) mean += e[j];
        mean /= double(inner.size());
        double ss = 0;
        for (const auto& e : inner) ss += (e[j] - mean) * (e[j] - mean);
        double se = std::sqrt(ss / double(inner.size() - 1));
        if (!(se > 0)) return;
        rep.t[j] = (rep.theta[j] - theta_hat[j]) / se;
      }
      rep.ok = true;
    } catch (const std::exception&) {
    }
    reps[size_t(b)] = std::move(rep);
  });

  CiTable out;
  out.names = names;
  std::vector<const OuterRep*> ok;
  for (const auto& r : reps)
    if (r.ok) ok.push_back(&r);
  out.outer_used = int(ok.size());
  out.outer_failed = B1 - out.outer_used;
  if (out.outer_failed > cfg.max_failure_share * B1)
    throw std::runtime_error("double bootstrap aborted: " +
                             std::to_string(out.outer_failed) + " of " +
                             std::to_string(B1) + " outer replicates failed");
  if (ok.size() < 2) throw std::runtime_error("too few successful outer replicates");

  out.estimate = theta_hat;
  out.lower.resize(p);
  out.upper.resize(p);
  for (size_t j = 0; j < p; ++j) {
    double mean = 0;
    for (const auto* r : ok) mean += r->theta[j];
    mean /= double(ok.size());
    double ss = 0;
    for (const auto* r : ok) ss += (r->theta[j] - mean) * (r->theta[j] - mean);
    double se = std::sqrt(ss / double(ok.size() - 1));

    std::vector<double> t;
    t.reserve(ok.size());
    for (const auto* r : ok) t.push_back(r->t[j]);
    std::sort(t.begin(), t.end());
    double t_lo = quantile_type7(t, cfg.alpha / 2.0);
    double t_hi = quantile_type7(t, 1.0 - cfg.alpha / 2.0);
    // Studentized intervals need not bracket the point estimate when the
    // bootstrap distribution is strongly skewed (scale parameters near their
    // floor); they are reported as computed.
    out.lower[j] = theta_hat[j] - t_hi * se;
    out.upper[j] = theta_hat[j] - t_lo * se;
  }
  return out;
}

double variance_pvalue(const FitResult& fitted, const PanelDataset& data,
                       const BootstrapConfig& cfg, const std::string& target) {
  cfg.validate();
  if (target != "sigma" && target != "phi1")
    throw std::invalid_argument("variance_pvalue target must be sigma or phi1, got " +
                                target);
  double observed = target == "sigma" ? fitted.params.sigma : fitted.params.phi1;

  ModelSpec null_spec = fitted.spec;
  if (target == "sigma") {
    if (!fitted.spec.random_intercept) throw std::invalid_argument("sigma not in model");
    null_spec.random_intercept = false;
  } else {
    if (!fitted.spec.random_slope) throw std::invalid_argument("phi1 not in model");
    null_spec.random_slope = false;
  }
  FitResult null_fit = fit(null_spec, data, {"qn"}, cfg.seed);

  const ModelFrame null_frame = make_frame(data, null_spec);
  const ModelFrame full_frame = make_frame(data, fitted.spec);
  ParameterSet start = fitted.params;  // full-model start for the refits
  const int B = cfg.B_rmse;
  std::vector<double> est(size_t(B), std::nan(""));

  parallel_for(B, cfg.threads, [&](int b) {
    Rng rng(cfg.seed, std::uint64_t(b) + 1);
    ModelFrame nf = null_frame;
    simulate_counts(null_fit.params, nf, rng, nullptr);
    ModelFrame ff = full_frame;
    ff.y = nf.y;
    try {
      ParameterSet e = refit_warm(ff, start);
      est[size_t(b)] = target == "sigma" ? e.sigma : e.phi1;
    } catch (const std::exception&) {
    }
  });

  int used = 0, exceed = 0, failed = 0;
  for (double e : est) {
    if (std::isnan(e)) {
      ++failed;
      continue;
    }
    ++used;
    if (e >= observed) ++exceed;
  }
  if (failed > cfg.max_failure_share * B)
    throw std::runtime_error("variance p-value bootstrap aborted: too many refit failures");
  return double(exceed) / double(used);
}

}  // namespace arrcp
