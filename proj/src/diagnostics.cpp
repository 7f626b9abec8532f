#include "arrcp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "arrcp/rng.hpp"

namespace arrcp {

std::vector<double> pearson_residuals(const FitResult& fit, const PanelDataset& data) {
  FittedValues fv = predict_fitted(fit, data);
  std::vector<double> r(fv.mu.size());
  for (size_t i = 0; i < fv.mu.size(); ++i) {
    if (!(fv.mu[i] > 0)) throw std::runtime_error("fitted mean is not positive");
    r[i] = (data.y[i] - fv.mu[i]) / std::sqrt(fv.mu[i]);
  }
  return r;
}

CaicResult caic(const FitResult& fit, const PanelDataset& data) {
  ModelFrame frame = make_frame(data, fit.spec);
  FittedValues fv = predict_fitted(fit, data);

  CaicResult out;
  for (int i = 0; i < frame.n; ++i)
    out.cond_loglik += poisson_loglik(frame.y[size_t(i)], fv.mu[size_t(i)]);

  // Working design M = [X | sigma*Z_u | phi1*x1*Z_v], weights W = mu_hat,
  // ridge penalty I on the random-effect columns only.
  const bool ri = fit.spec.random_intercept && fit.params.sigma > 0;
  const bool rs = fit.spec.random_slope && fit.params.phi1 > 0;
  int nu = ri ? frame.n_u : 0;
  int nv = rs ? frame.D : 0;
  int m = 4 + nu + nv;

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);  // M' W M
  for (int i = 0; i < frame.n; ++i) {
    size_t k = size_t(i);
    Eigen::VectorXd row = Eigen::VectorXd::Zero(m);
    row[0] = 1.0;
    row[1] = frame.x1[k];
    row[2] = frame.x2[k];
    row[3] = frame.x3[k];
    if (ri) row[4 + frame.u_index[k]] = fit.params.sigma;
    if (rs) row[4 + nu + frame.area_index[k]] = fit.params.phi1 * frame.x1[k];
    A.selfadjointView<Eigen::Lower>().rankUpdate(row, fv.mu[k]);
  }
  A = A.selfadjointView<Eigen::Lower>();
  Eigen::MatrixXd P = A;
  for (int j = 4; j < m; ++j) P(j, j) += 1.0;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(P);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("singular penalized working system in cAIC");
  // edf = tr(P^{-1} A)
  Eigen::MatrixXd S = ldlt.solve(A);
  out.edf = S.trace();
  out.caic = -2.0 * out.cond_loglik + 2.0 * out.edf;
  return out;
}

static std::vector<std::pair<double, double>> qq_pairs(std::vector<double> modes) {
  std::sort(modes.begin(), modes.end());
  std::vector<std::pair<double, double>> out;
  size_t n = modes.size();
  for (size_t k = 0; k < n; ++k)
    out.emplace_back(normal_quantile((double(k) + 0.5) / double(n)), modes[k]);
  return out;
}

QqData qq_data(const RandomEffectState& re, const ModelSpec& spec) {
  QqData out;
  if (spec.random_intercept)
    out.intercept = qq_pairs({re.u.data(), re.u.data() + re.u.size()});
  if (spec.random_slope)
    out.slope = qq_pairs({re.v.data(), re.v.data() + re.v.size()});
  return out;
}

DiagnosticsReport diagnose(const FitResult& fit, const PanelDataset& data) {
  DiagnosticsReport rep;
  rep.pearson = pearson_residuals(fit, data);
  rep.caic = caic(fit, data);
  rep.qq = qq_data(fit.re_mode, fit.spec);
  size_t within = 0;
  for (double r : rep.pearson)
    if (r >= -1.5 && r <= 1.5) ++within;
  rep.share_within_band = rep.pearson.empty() ? 0.0 : double(within) / double(rep.pearson.size());
  return rep;
}

}  // namespace arrcp
