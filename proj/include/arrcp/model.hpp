#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "arrcp/panel.hpp"

namespace arrcp {

// Which random-effect terms the model carries. The full model has a weekly
// random intercept per (area, week) and one random slope per area on x1.
struct ModelSpec {
  bool random_intercept = true;
  bool random_slope = true;
};

// beta = (beta0..beta3); sigma scales the intercept effects, phi1 the slope
// effects. Terms switched off in ModelSpec keep their parameter at exactly 0.
struct ParameterSet {
  Eigen::Vector4d beta = Eigen::Vector4d::Zero();
  double sigma = 0.0;
  double phi1 = 0.0;
};

// Flattened observation data plus the random-effect index maps, precomputed
// once per (panel, spec) and shared by every likelihood evaluation.
struct ModelFrame {
  ModelSpec spec;
  int D = 0;
  int n = 0;    // observations
  int n_u = 0;  // observed (area, week) pairs

  std::vector<double> y, logoff, x1, x2, x3;
  std::vector<int> u_index;     // per obs, RE id of its (area, week); -1 if none
  std::vector<int> area_index;  // per obs
  std::vector<std::pair<int, int>> u_area_week;  // u id -> (area, global week)
  std::vector<std::vector<int>> u_of_area;       // week-sorted u ids per area
  std::vector<std::pair<int, int>> obs_range_of_area;  // [begin, end) obs index

  int q() const {
    return (spec.random_intercept ? n_u : 0) + (spec.random_slope ? D : 0);
  }
};

ModelFrame make_frame(const PanelDataset& panel, const ModelSpec& spec);

struct RandomEffectState {
  Eigen::VectorXd u;  // n_u standard-normal intercept effects
  Eigen::VectorXd v;  // D standard-normal slope effects
};

RandomEffectState zero_state(const ModelFrame& frame);

double linear_predictor(const ParameterSet& params, const RandomEffectState& re,
                        const ModelFrame& frame, int obs);

// y*log(mu) - mu - lgamma(y+1)
double poisson_loglik(double y, double mu);

// Sum of Poisson terms minus the N(0,1) penalty on (u, v), including the
// Gaussian normalizing constant -(q/2)*log(2*pi). Returns -inf on linear
// predictor overflow.
double joint_penalized_loglik(const ParameterSet& params, const RandomEffectState& re,
                              const ModelFrame& frame);

// Analytic gradient w.r.t. [beta(4), sigma, phi1, u, v]; layout matches that order.
Eigen::VectorXd joint_gradient(const ParameterSet& params, const RandomEffectState& re,
                               const ModelFrame& frame);

struct InnerOptions {
  double grad_tol = 1e-8;
  int max_iter = 100;
  int max_halvings = 30;
};

struct ModeResult {
  RandomEffectState state;
  double joint = 0.0;     // penalized log-likelihood at the mode
  double logdet = 0.0;    // log det of the negative Hessian at the mode
  double grad_norm = 0.0;
  int iterations = 0;
};

// Full Newton with step halving on the concave joint objective; throws on
// non-convergence or an indefinite Hessian.
ModeResult find_re_mode(const ParameterSet& params, const ModelFrame& frame,
                        const RandomEffectState& start, const InnerOptions& opt = {});

struct LaplaceResult {
  double value = 0.0;
  ModeResult mode;
};

// value = joint(mode) + (q/2) log 2pi - 0.5 log det H. Exact when q = 0.
LaplaceResult laplace_marginal_loglik(const ParameterSet& params, const ModelFrame& frame,
                                      const RandomEffectState* warm_start = nullptr,
                                      const InnerOptions& opt = {});

}  // namespace arrcp
