#include "arrcp/model.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace arrcp {

namespace {
constexpr double kEtaCap = 500.0;  // exp() overflow guard
constexpr double kLog2Pi = 1.8378770664093454836;
}  // namespace

ModelFrame make_frame(const PanelDataset& panel, const ModelSpec& spec) {
  ModelFrame f;
  f.spec = spec;
  f.D = panel.D();
  f.n = int(panel.n());
  f.y.resize(size_t(f.n));
  f.logoff.resize(size_t(f.n));
  f.x1.resize(size_t(f.n));
  f.x2.resize(size_t(f.n));
  f.x3.resize(size_t(f.n));
  f.u_index.assign(size_t(f.n), -1);
  f.area_index.resize(size_t(f.n));
  f.u_of_area.resize(size_t(f.D));
  f.obs_range_of_area.resize(size_t(f.D));

  int next_u = 0;
  for (int a = 0; a < f.D; ++a) {
    int begin = a * panel.T;
    f.obs_range_of_area[size_t(a)] = {begin, begin + panel.T};
    std::map<int, int> week_to_u;  // panel days are ordered, weeks appear sorted
    for (int t = 0; t < panel.T; ++t) {
      size_t i = panel.idx(a, t);
      f.y[i] = panel.y[i];
      f.logoff[i] = std::log(panel.offset[i]);
      f.x1[i] = panel.x1[i];
      f.x2[i] = panel.x2[i];
      f.x3[i] = panel.x3[i];
      f.area_index[i] = a;
      int wk = panel.w[i];
      auto [it, inserted] = week_to_u.emplace(wk, next_u);
      if (inserted) {
        f.u_area_week.emplace_back(a, wk);
        f.u_of_area[size_t(a)].push_back(next_u);
        ++next_u;
      }
      f.u_index[i] = it->second;
    }
  }
  f.n_u = next_u;
  return f;
}

RandomEffectState zero_state(const ModelFrame& frame) {
  RandomEffectState s;
  s.u = Eigen::VectorXd::Zero(frame.n_u);
  s.v = Eigen::VectorXd::Zero(frame.D);
  return s;
}

static inline double eta_at(const ParameterSet& p, const RandomEffectState& re,
                            const ModelFrame& f, int i) {
  size_t k = size_t(i);
  double eta = f.logoff[k] + p.beta[0] + p.beta[1] * f.x1[k] + p.beta[2] * f.x2[k] +
               p.beta[3] * f.x3[k];
  if (f.spec.random_intercept) eta += p.sigma * re.u[f.u_index[k]];
  if (f.spec.random_slope) eta += p.phi1 * re.v[f.area_index[k]] * f.x1[k];
  return eta;
}

double linear_predictor(const ParameterSet& params, const RandomEffectState& re,
                        const ModelFrame& frame, int obs) {
  if (obs < 0 || obs >= frame.n) throw std::out_of_range("observation index");
  size_t k = size_t(obs);
  if (!std::isfinite(frame.x1[k]) || !std::isfinite(frame.x2[k]) ||
      !std::isfinite(frame.x3[k]))
    throw std::runtime_error("non-finite covariate at observation " + std::to_string(obs));
  return eta_at(params, re, frame, obs);
}

double poisson_loglik(double y, double mu) {
  if (!(mu > 0)) throw std::domain_error("poisson_loglik: mu must be positive");
  if (y < 0 || y != std::floor(y)) throw std::domain_error("poisson_loglik: bad count");
  return y * std::log(mu) - mu - std::lgamma(y + 1);
}

double joint_penalized_loglik(const ParameterSet& params, const RandomEffectState& re,
                              const ModelFrame& frame) {
  double ll = 0.0;
  for (int i = 0; i < frame.n; ++i) {
    double eta = eta_at(params, re, frame, i);
    if (eta > kEtaCap) return -std::numeric_limits<double>::infinity();
    ll += frame.y[size_t(i)] * eta - std::exp(eta) - std::lgamma(frame.y[size_t(i)] + 1);
  }
  int q = frame.q();
  if (frame.spec.random_intercept) ll -= 0.5 * re.u.squaredNorm();
  if (frame.spec.random_slope) ll -= 0.5 * re.v.squaredNorm();
  ll -= 0.5 * double(q) * kLog2Pi;
  return ll;
}

Eigen::VectorXd joint_gradient(const ParameterSet& params, const RandomEffectState& re,
                               const ModelFrame& frame) {
  int nu = frame.spec.random_intercept ? frame.n_u : 0;
  int nv = frame.spec.random_slope ? frame.D : 0;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(6 + nu + nv);
  for (int i = 0; i < frame.n; ++i) {
    size_t k = size_t(i);
    double eta = eta_at(params, re, frame, i);
    double r = frame.y[k] - std::exp(eta);  // score residual
    g[0] += r;
    g[1] += r * frame.x1[k];
    g[2] += r * frame.x2[k];
    g[3] += r * frame.x3[k];
    if (frame.spec.random_intercept) {
      g[4] += r * re.u[frame.u_index[k]];
      g[6 + frame.u_index[k]] += r * params.sigma;
    }
    if (frame.spec.random_slope) {
      g[5] += r * re.v[frame.area_index[k]] * frame.x1[k];
      g[6 + nu + frame.area_index[k]] += r * params.phi1 * frame.x1[k];
    }
  }
  if (frame.spec.random_intercept) g.segment(6, nu) -= re.u;
  if (frame.spec.random_slope) g.segment(6 + nu, nv) -= re.v;
  return g;
}

namespace {

// Per-area arrow-shaped negative Hessian over (u_{a,.}, v_a):
//   diag(d) on the intercept block, column c coupling to v_a, scalar s on v_a.
struct AreaBlocks {
  std::vector<double> mu;         // per obs, cached from the last eta pass
  Eigen::VectorXd d, c;           // n_u
  Eigen::VectorXd s;              // D
};

// One pass: joint value, gradient over (u,v) and Hessian blocks.
bool evaluate(const ParameterSet& p, const RandomEffectState& re, const ModelFrame& f,
              double* joint, Eigen::VectorXd* gu, Eigen::VectorXd* gv, AreaBlocks* H) {
  const bool ri = f.spec.random_intercept, rs = f.spec.random_slope;
  double ll = 0.0;
  if (ri) {
    gu->setZero(f.n_u);
    H->d.setConstant(f.n_u, 1.0);
  }
  if (rs) {
    gv->setZero(f.D);
    H->s.setConstant(f.D, 1.0);
  }
  if (ri && rs) H->c.setZero(f.n_u);
  for (int i = 0; i < f.n; ++i) {
    size_t k = size_t(i);
    double eta = eta_at(p, re, f, i);
    if (eta > kEtaCap) return false;
    double mu = std::exp(eta);
    ll += f.y[k] * eta - mu - std::lgamma(f.y[k] + 1);
    double r = f.y[k] - mu;
    if (ri) {
      int uk = f.u_index[k];
      (*gu)[uk] += p.sigma * r;
      H->d[uk] += p.sigma * p.sigma * mu;
    }
    if (rs) {
      int a = f.area_index[k];
      (*gv)[a] += p.phi1 * f.x1[k] * r;
      H->s[a] += p.phi1 * p.phi1 * f.x1[k] * f.x1[k] * mu;
    }
    if (ri && rs) H->c[f.u_index[k]] += p.sigma * p.phi1 * f.x1[k] * mu;
  }
  if (ri) {
    *gu -= re.u;
    ll -= 0.5 * re.u.squaredNorm();
  }
  if (rs) {
    *gv -= re.v;
    ll -= 0.5 * re.v.squaredNorm();
  }
  ll -= 0.5 * double(f.q()) * kLog2Pi;
  *joint = ll;
  return true;
}

// log det of the arrow system; throws if any Schur complement is nonpositive.
double log_det(const ModelFrame& f, const AreaBlocks& H) {
  const bool ri = f.spec.random_intercept, rs = f.spec.random_slope;
  double ld = 0.0;
  if (ri)
    for (int k = 0; k < f.n_u; ++k) ld += std::log(H.d[k]);
  if (rs) {
    for (int a = 0; a < f.D; ++a) {
      double schur = H.s[a];
      if (ri)
        for (int k : f.u_of_area[size_t(a)]) schur -= H.c[k] * H.c[k] / H.d[k];
      if (!(schur > 0))
        throw std::runtime_error("Hessian not positive definite (area block " +
                                 std::to_string(a) + ")");
      ld += std::log(schur);
    }
  }
  return ld;
}

// Newton direction solving the arrow system H * step = grad.
void solve_step(const ModelFrame& f, const AreaBlocks& H, const Eigen::VectorXd& gu,
                const Eigen::VectorXd& gv, Eigen::VectorXd* du, Eigen::VectorXd* dv) {
  const bool ri = f.spec.random_intercept, rs = f.spec.random_slope;
  if (ri && !rs) {
    *du = gu.cwiseQuotient(H.d);
    return;
  }
  if (rs && !ri) {
    *dv = gv.cwiseQuotient(H.s);
    return;
  }
  du->resize(f.n_u);
  dv->resize(f.D);
  for (int a = 0; a < f.D; ++a) {
    double schur = H.s[a], rhs = gv[a];
    for (int k : f.u_of_area[size_t(a)]) {
      schur -= H.c[k] * H.c[k] / H.d[k];
      rhs -= H.c[k] * gu[k] / H.d[k];
    }
    if (!(schur > 0))
      throw std::runtime_error("Hessian not positive definite (area block " +
                               std::to_string(a) + ")");
    double sv = rhs / schur;
    (*dv)[a] = sv;
    for (int k : f.u_of_area[size_t(a)]) (*du)[k] = (gu[k] - H.c[k] * sv) / H.d[k];
  }
}

}  // namespace

ModeResult find_re_mode(const ParameterSet& params, const ModelFrame& frame,
                        const RandomEffectState& start, const InnerOptions& opt) {
  const bool ri = frame.spec.random_intercept, rs = frame.spec.random_slope;
  ModeResult res;
  res.state = start;
  if (ri && res.state.u.size() != frame.n_u) res.state.u = Eigen::VectorXd::Zero(frame.n_u);
  if (rs && res.state.v.size() != frame.D) res.state.v = Eigen::VectorXd::Zero(frame.D);
  if (!ri) res.state.u = Eigen::VectorXd::Zero(frame.n_u);
  if (!rs) res.state.v = Eigen::VectorXd::Zero(frame.D);

  AreaBlocks H;
  Eigen::VectorXd gu, gv, du, dv;
  double joint = 0.0;
  if (!evaluate(params, res.state, frame, &joint, &gu, &gv, &H)) {
    // overflow at the warm start: retry from zero once
    res.state = zero_state(frame);
    if (!evaluate(params, res.state, frame, &joint, &gu, &gv, &H))
      throw std::runtime_error("linear predictor overflow at zero random effects");
  }

  if (frame.q() == 0) {
    res.joint = joint;
    res.logdet = 0.0;
    res.grad_norm = 0.0;
    return res;
  }

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    double gnorm = 0.0;
    if (ri) gnorm = std::max(gnorm, gu.lpNorm<Eigen::Infinity>());
    if (rs) gnorm = std::max(gnorm, gv.lpNorm<Eigen::Infinity>());
    res.grad_norm = gnorm;
    res.iterations = iter;
    if (gnorm < opt.grad_tol) {
      res.joint = joint;
      res.logdet = log_det(frame, H);
      return res;
    }

    solve_step(frame, H, gu, gv, &du, &dv);
    double step = 1.0;
    RandomEffectState trial = res.state;
    bool accepted = false;
    for (int h = 0; h <= opt.max_halvings; ++h) {
      if (ri) trial.u = res.state.u + step * du;
      if (rs) trial.v = res.state.v + step * dv;
      double trial_joint = 0.0;
      AreaBlocks Ht;
      Eigen::VectorXd gut, gvt;
      if (evaluate(params, trial, frame, &trial_joint, &gut, &gvt, &Ht) &&
          trial_joint > joint - 1e-14 * std::abs(joint)) {
        res.state = trial;
        joint = trial_joint;
        gu = std::move(gut);
        gv = std::move(gvt);
        H = std::move(Ht);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted)
      throw std::runtime_error("inner Newton stalled; gradient norm " +
                               std::to_string(res.grad_norm));
  }
  throw std::runtime_error("inner Newton did not converge; gradient norm " +
                           std::to_string(res.grad_norm));
}

LaplaceResult laplace_marginal_loglik(const ParameterSet& params, const ModelFrame& frame,
                                      const RandomEffectState* warm_start,
                                      const InnerOptions& opt) {
  RandomEffectState start = warm_start ? *warm_start : zero_state(frame);
  LaplaceResult out;
  out.mode = find_re_mode(params, frame, start, opt);
  out.value = out.mode.joint + 0.5 * double(frame.q()) * kLog2Pi - 0.5 * out.mode.logdet;
  return out;
}

}  // namespace arrcp
