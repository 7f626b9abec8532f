#include "arrcp/fit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace arrcp {

namespace {

constexpr double kScaleFloor = 1e-8;  // lower bound for sigma, phi1 on natural scale
constexpr double kBadObjective = 1e30;

int n_theta(const ModelSpec& spec) {
  return 4 + (spec.random_intercept ? 1 : 0) + (spec.random_slope ? 1 : 0);
}

Eigen::VectorXd pack(const ModelSpec& spec, const ParameterSet& p) {
  Eigen::VectorXd theta(n_theta(spec));
  theta.head<4>() = p.beta;
  int k = 4;
  if (spec.random_intercept) theta[k++] = std::log(std::max(p.sigma, kScaleFloor));
  if (spec.random_slope) theta[k++] = std::log(std::max(p.phi1, kScaleFloor));
  return theta;
}

ParameterSet unpack(const ModelSpec& spec, const Eigen::VectorXd& theta) {
  ParameterSet p;
  p.beta = theta.head<4>();
  int k = 4;
  if (spec.random_intercept) p.sigma = std::max(std::exp(theta[k++]), kScaleFloor);
  if (spec.random_slope) p.phi1 = std::max(std::exp(theta[k++]), kScaleFloor);
  return p;
}

// Negative Laplace log-likelihood with a warm-started inner mode shared
// across evaluations of the same optimizer run.
struct Objective {
  const ModelFrame* frame;
  InnerOptions inner;
  mutable RandomEffectState warm;
  mutable bool has_warm = false;

  double operator()(const Eigen::VectorXd& theta) const {
    ParameterSet p = unpack(frame->spec, theta);
    try {
      LaplaceResult r =
          laplace_marginal_loglik(p, *frame, has_warm ? &warm : nullptr, inner);
      warm = r.mode.state;
      has_warm = true;
      return -r.value;
    } catch (const std::exception&) {
      return kBadObjective;
    }
  }
};

}  // namespace

std::vector<std::string> free_parameter_names(const ModelSpec& spec) {
  std::vector<std::string> names = {"beta0", "beta1", "beta2", "beta3"};
  if (spec.random_intercept) names.push_back("sigma");
  if (spec.random_slope) names.push_back("phi1");
  return names;
}

std::vector<double> free_parameter_values(const ModelSpec& spec, const ParameterSet& p) {
  std::vector<double> v = {p.beta[0], p.beta[1], p.beta[2], p.beta[3]};
  if (spec.random_intercept) v.push_back(p.sigma);
  if (spec.random_slope) v.push_back(p.phi1);
  return v;
}

Eigen::Vector4d glm_poisson_start(const ModelFrame& frame) {
  double ysum = 0, offsum = 0;
  for (int i = 0; i < frame.n; ++i) {
    ysum += frame.y[size_t(i)];
    offsum += std::exp(frame.logoff[size_t(i)]);
  }
  Eigen::Vector4d beta = Eigen::Vector4d::Zero();
  beta[0] = std::log((ysum + 0.5) / offsum);

  for (int iter = 0; iter < 50; ++iter) {
    Eigen::Matrix4d XtWX = Eigen::Matrix4d::Zero();
    Eigen::Vector4d XtWz = Eigen::Vector4d::Zero();
    for (int i = 0; i < frame.n; ++i) {
      size_t k = size_t(i);
      Eigen::Vector4d x(1.0, frame.x1[k], frame.x2[k], frame.x3[k]);
      double eta = frame.logoff[k] + beta.dot(x);
      double mu = std::exp(std::min(eta, 500.0));
      double z = (eta - frame.logoff[k]) + (frame.y[k] - mu) / mu;
      XtWX += mu * x * x.transpose();
      XtWz += mu * z * x;
    }
    Eigen::Vector4d bnew = XtWX.ldlt().solve(XtWz);
    double step = (bnew - beta).lpNorm<Eigen::Infinity>();
    beta = bnew;
    if (step < 1e-10) break;
  }
  return beta;
}

FitResult fit(const ModelSpec& spec, const PanelDataset& data,
              const std::vector<std::string>& optimizers, std::uint64_t seed,
              const FitOptions& options) {
  if (optimizers.empty()) throw std::invalid_argument("optimizer list is empty");
  bool any_positive = std::any_of(data.y.begin(), data.y.end(), [](double y) { return y > 0; });
  if (!any_positive) throw std::runtime_error("degenerate panel: all counts are zero");

  ModelFrame frame = make_frame(data, spec);
  ParameterSet start;
  start.beta = glm_poisson_start(frame);
  start.sigma = spec.random_intercept ? options.start_scale : 0.0;
  start.phi1 = spec.random_slope ? options.start_scale : 0.0;
  Eigen::VectorXd theta0 = pack(spec, start);

  FitResult out;
  out.spec = spec;
  out.seed = seed;
  for (const auto& name : optimizers) {
    Objective obj{&frame, options.inner, zero_state(frame), false};
    OptimizerRun run;
    run.name = name;
    try {
      OptimResult r = minimize_by_name(name, std::cref(obj), theta0, options.outer);
      run.evals = r.evals;
      if (!std::isfinite(r.f) || r.f >= kBadObjective) {
        run.message = "objective failed: " + r.message;
      } else {
        run.success = true;
        run.params = unpack(spec, r.x);
        run.loglik = -r.f;
        run.message = r.converged ? "converged" : ("not converged: " + r.message);
        if (!r.converged)
          out.warnings.push_back("optimizer " + name + " did not meet tolerances: " +
                                 r.message);
      }
    } catch (const std::exception& e) {
      run.message = e.what();
      out.warnings.push_back("optimizer " + name + " failed: " + e.what());
    }
    out.per_optimizer.push_back(std::move(run));
  }

  const OptimizerRun* best = nullptr;
  for (const auto& run : out.per_optimizer)
    if (run.success && (!best || run.loglik > best->loglik)) best = &run;
  if (!best) {
    std::string diag;
    for (const auto& run : out.per_optimizer) diag += "\n  " + run.name + ": " + run.message;
    throw std::runtime_error("all optimizers failed:" + diag);
  }
  out.params = best->params;
  out.reference_optimizer = best->name;
  LaplaceResult lap = laplace_marginal_loglik(out.params, frame, nullptr, options.inner);
  out.loglik = lap.value;
  out.re_mode = lap.mode.state;

  int successes = 0;
  for (const auto& run : out.per_optimizer) successes += run.success ? 1 : 0;
  if (successes >= 2) out.convergence_cv = golden_rule_cv(spec, out.per_optimizer);
  return out;
}

ParameterSet refit_warm(const ModelFrame& frame, const ParameterSet& start,
                        const std::string& optimizer, const FitOptions& options) {
  Objective obj{&frame, options.inner, zero_state(frame), false};
  OptimResult r = minimize_by_name(optimizer, std::cref(obj), pack(frame.spec, start),
                                   options.outer);
  if (!std::isfinite(r.f) || r.f >= kBadObjective)
    throw std::runtime_error("warm refit failed: " + r.message);
  return unpack(frame.spec, r.x);
}

std::map<std::string, double> golden_rule_cv(const ModelSpec& spec,
                                             const std::vector<OptimizerRun>& runs) {
  std::vector<const OptimizerRun*> ok;
  for (const auto& r : runs)
    if (r.success) ok.push_back(&r);
  if (ok.size() < 2)
    throw std::runtime_error("golden rule needs at least 2 successful optimizers");

  auto names = free_parameter_names(spec);
  std::map<std::string, double> cv;
  for (size_t j = 0; j < names.size(); ++j) {
    double mean = 0;
    for (const auto* r : ok) mean += free_parameter_values(spec, r->params)[j];
    mean /= double(ok.size());
    double ss = 0;
    for (const auto* r : ok) {
      double d = free_parameter_values(spec, r->params)[j] - mean;
      ss += d * d;
    }
    double sd = std::sqrt(ss / double(ok.size() - 1));
    cv[names[j]] = mean == 0.0 ? 0.0 : sd / mean;
  }
  return cv;
}

FittedValues predict_fitted(const FitResult& fit, const PanelDataset& data) {
  ModelFrame frame = make_frame(data, fit.spec);
  if (frame.n_u != fit.re_mode.u.size() || frame.D != fit.re_mode.v.size())
    throw std::runtime_error("fit result does not match panel dimensions");
  FittedValues out;
  out.mu.resize(size_t(frame.n));
  out.rate.resize(size_t(frame.n));
  out.rate_100k.resize(size_t(frame.n));
  for (int i = 0; i < frame.n; ++i) {
    double eta = linear_predictor(fit.params, fit.re_mode, frame, i);
    double mu = std::exp(eta);
    double off = std::exp(frame.logoff[size_t(i)]);
    out.mu[size_t(i)] = mu;
    out.rate[size_t(i)] = mu / off;
    out.rate_100k[size_t(i)] = 100000.0 * mu / off;
  }
  return out;
}

// ---------------------------------------------------------------------------
// fit.json

using json = nlohmann::ordered_json;

static json params_to_json(const ModelSpec& spec, const ParameterSet& p) {
  json j;
  j["beta"] = {p.beta[0], p.beta[1], p.beta[2], p.beta[3]};
  if (spec.random_intercept) j["sigma"] = p.sigma;
  if (spec.random_slope) j["phi1"] = p.phi1;
  return j;
}

static ParameterSet params_from_json(const ModelSpec& spec, const json& j) {
  ParameterSet p;
  auto b = j.at("beta");
  for (int k = 0; k < 4; ++k) p.beta[k] = b.at(size_t(k)).get<double>();
  if (spec.random_intercept) p.sigma = j.at("sigma").get<double>();
  if (spec.random_slope) p.phi1 = j.at("phi1").get<double>();
  return p;
}

void save_fit(const FitResult& fit, const PanelDataset& data, const std::string& path) {
  ModelFrame frame = make_frame(data, fit.spec);
  json j;
  j["model"] = {{"random_intercept", fit.spec.random_intercept},
                {"random_slope", fit.spec.random_slope}};
  j["params"] = params_to_json(fit.spec, fit.params);
  j["loglik"] = fit.loglik;
  j["reference_optimizer"] = fit.reference_optimizer;
  j["seed"] = fit.seed;
  json po = json::object();
  for (const auto& run : fit.per_optimizer) {
    json r;
    r["success"] = run.success;
    r["message"] = run.message;
    r["evals"] = run.evals;
    if (run.success) {
      r["params"] = params_to_json(fit.spec, run.params);
      r["loglik"] = run.loglik;
    }
    po[run.name] = r;
  }
  j["per_optimizer"] = po;
  j["convergence_cv"] = fit.convergence_cv;
  j["warnings"] = fit.warnings;

  json u = json::array();
  if (fit.spec.random_intercept)
    for (int k = 0; k < frame.n_u; ++k) {
      auto [a, wk] = frame.u_area_week[size_t(k)];
      u.push_back({{"area", data.areas[size_t(a)]}, {"week", wk}, {"value", fit.re_mode.u[k]}});
    }
  json v = json::array();
  if (fit.spec.random_slope)
    for (int a = 0; a < frame.D; ++a)
      v.push_back({{"area", data.areas[size_t(a)]}, {"value", fit.re_mode.v[a]}});
  j["re_mode"] = {{"u", u}, {"v", v}};

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

FitResult load_fit(const PanelDataset& data, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open fit file: " + path);
  json j = json::parse(in);

  FitResult fit;
  fit.spec.random_intercept = j.at("model").at("random_intercept").get<bool>();
  fit.spec.random_slope = j.at("model").at("random_slope").get<bool>();
  fit.params = params_from_json(fit.spec, j.at("params"));
  fit.loglik = j.at("loglik").get<double>();
  fit.reference_optimizer = j.at("reference_optimizer").get<std::string>();
  fit.seed = j.at("seed").get<std::uint64_t>();
  for (auto& [name, r] : j.at("per_optimizer").items()) {
    OptimizerRun run;
    run.name = name;
    run.success = r.at("success").get<bool>();
    run.message = r.at("message").get<std::string>();
    run.evals = r.at("evals").get<int>();
    if (run.success) {
      run.params = params_from_json(fit.spec, r.at("params"));
      run.loglik = r.at("loglik").get<double>();
    }
    fit.per_optimizer.push_back(std::move(run));
  }
  for (auto& [name, value] : j.at("convergence_cv").items())
    fit.convergence_cv[name] = value.get<double>();
  for (const auto& w : j.at("warnings")) fit.warnings.push_back(w.get<std::string>());

  ModelFrame frame = make_frame(data, fit.spec);
  fit.re_mode = zero_state(frame);
  std::map<std::pair<std::string, int>, int> u_lookup;
  for (int k = 0; k < frame.n_u; ++k) {
    auto [a, wk] = frame.u_area_week[size_t(k)];
    u_lookup[{data.areas[size_t(a)], wk}] = k;
  }
  std::map<std::string, int> area_lookup;
  for (int a = 0; a < frame.D; ++a) area_lookup[data.areas[size_t(a)]] = a;
  for (const auto& e : j.at("re_mode").at("u")) {
    auto key = std::pair{e.at("area").get<std::string>(), e.at("week").get<int>()};
    auto it = u_lookup.find(key);
    if (it == u_lookup.end())
      throw std::runtime_error("fit file random effect (" + key.first + ", week " +
                               std::to_string(key.second) + ") not present in panel");
    fit.re_mode.u[it->second] = e.at("value").get<double>();
  }
  for (const auto& e : j.at("re_mode").at("v")) {
    auto it = area_lookup.find(e.at("area").get<std::string>());
    if (it == area_lookup.end())
      throw std::runtime_error("fit file slope effect area not present in panel");
    fit.re_mode.v[it->second] = e.at("value").get<double>();
  }
  return fit;
}

}  // namespace arrcp
