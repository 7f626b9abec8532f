#include "arrcp/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace arrcp {

Eigen::VectorXd numeric_gradient(const ObjectiveFn& fn, const Eigen::VectorXd& x,
                                 double rel_h, int* evals) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (int j = 0; j < x.size(); ++j) {
    double h = rel_h * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + h;
    double fp = fn(xp);
    xp[j] = x[j] - h;
    double fm = fn(xp);
    xp[j] = x[j];
    g[j] = (fp - fm) / (2 * h);
    if (evals) *evals += 2;
  }
  return g;
}

OptimResult minimize_bfgs(const ObjectiveFn& fn, const Eigen::VectorXd& x0,
                          const OptimOptions& opt) {
  const int p = int(x0.size());
  OptimResult res;
  res.x = x0;
  res.f = fn(x0);
  res.evals = 1;
  if (!std::isfinite(res.f)) {
    res.message = "objective not finite at start";
    return res;
  }
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(p, p);
  Eigen::VectorXd g = numeric_gradient(fn, res.x, 1e-5, &res.evals);

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    res.iterations = iter + 1;
    Eigen::VectorXd dir = -(Hinv * g);
    double slope = g.dot(dir);
    if (slope >= 0) {  // reset on a bad metric
      Hinv.setIdentity();
      dir = -g;
      slope = g.dot(dir);
      if (slope >= 0) {
        res.converged = true;  // gradient numerically zero
        return res;
      }
    }
    double step = 1.0;
    double fnew = std::numeric_limits<double>::infinity();
    Eigen::VectorXd xnew;
    bool ok = false;
    for (int h = 0; h < 40; ++h) {
      xnew = res.x + step * dir;
      fnew = fn(xnew);
      ++res.evals;
      if (std::isfinite(fnew) && fnew <= res.f + 1e-4 * step * slope) {
        ok = true;
        break;
      }
      step *= 0.5;
    }
    if (!ok) {
      res.message = "line search failed";
      res.converged = g.lpNorm<Eigen::Infinity>() < 1e-5;
      return res;
    }
    Eigen::VectorXd gnew = numeric_gradient(fn, xnew, 1e-5, &res.evals);
    Eigen::VectorXd s = xnew - res.x;
    Eigen::VectorXd yv = gnew - g;
    double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      Eigen::VectorXd Hy = Hinv * yv;
      double yHy = yv.dot(Hy);
      Hinv += ((sy + yHy) / (sy * sy)) * (s * s.transpose()) -
              (Hy * s.transpose() + s * Hy.transpose()) / sy;
    }
    double df = res.f - fnew;
    double dx = s.lpNorm<Eigen::Infinity>();
    res.x = xnew;
    res.f = fnew;
    g = gnew;
    if (dx < opt.step_tol && df < opt.f_tol) {
      res.converged = true;
      return res;
    }
  }
  res.message = "iteration cap reached";
  return res;
}

OptimResult minimize_nelder_mead(const ObjectiveFn& fn, const Eigen::VectorXd& x0,
                                 const OptimOptions& opt) {
  const int p = int(x0.size());
  OptimResult res;
  std::vector<Eigen::VectorXd> xs(size_t(p) + 1, x0);
  std::vector<double> fs(size_t(p) + 1);
  for (int j = 0; j < p; ++j)
    xs[size_t(j) + 1][j] += (x0[j] != 0.0 ? 0.05 * std::abs(x0[j]) + 0.05 : 0.1);
  for (size_t k = 0; k < xs.size(); ++k) {
    fs[k] = fn(xs[k]);
    ++res.evals;
  }

  auto order = [&] {
    std::vector<size_t> idx(xs.size());
    for (size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return fs[a] < fs[b]; });
    std::vector<Eigen::VectorXd> xs2;
    std::vector<double> fs2;
    for (size_t k : idx) {
      xs2.push_back(xs[k]);
      fs2.push_back(fs[k]);
    }
    xs = std::move(xs2);
    fs = std::move(fs2);
  };

  const double alpha = 1.0, gamma = 2.0, rho = 0.5, shrink = 0.5;
  int max_evals = opt.max_iter * std::max(4, 2 * p);
  for (int iter = 0; res.evals < max_evals; ++iter) {
    order();
    res.iterations = iter;
    double spread = 0.0;
    for (int j = 1; j <= p; ++j)
      spread = std::max(spread, (xs[size_t(j)] - xs[0]).lpNorm<Eigen::Infinity>());
    if (spread < opt.step_tol && std::abs(fs.back() - fs.front()) < opt.f_tol) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(p);
    for (int j = 0; j < p; ++j) centroid += xs[size_t(j)];
    centroid /= double(p);

    Eigen::VectorXd xr = centroid + alpha * (centroid - xs.back());
    double fr = fn(xr);
    ++res.evals;
    if (fr < fs[0]) {
      Eigen::VectorXd xe = centroid + gamma * (centroid - xs.back());
      double fe = fn(xe);
      ++res.evals;
      if (fe < fr) {
        xs.back() = xe;
        fs.back() = fe;
      } else {
        xs.back() = xr;
        fs.back() = fr;
      }
    } else if (fr < fs[size_t(p) - 1]) {
      xs.back() = xr;
      fs.back() = fr;
    } else {
      Eigen::VectorXd xc = centroid + rho * (xs.back() - centroid);
      double fc = fn(xc);
      ++res.evals;
      if (fc < fs.back()) {
        xs.back() = xc;
        fs.back() = fc;
      } else {
        for (size_t j = 1; j < xs.size(); ++j) {
          xs[j] = xs[0] + shrink * (xs[j] - xs[0]);
          fs[j] = fn(xs[j]);
          ++res.evals;
        }
      }
    }
  }
  order();
  res.x = xs[0];
  res.f = fs[0];
  if (!res.converged) res.message = "evaluation cap reached";
  return res;
}

OptimResult minimize_damped_newton(const ObjectiveFn& fn, const Eigen::VectorXd& x0,
                                   const OptimOptions& opt) {
  const int p = int(x0.size());
  OptimResult res;
  res.x = x0;
  res.f = fn(x0);
  res.evals = 1;
  if (!std::isfinite(res.f)) {
    res.message = "objective not finite at start";
    return res;
  }
  double lambda = 1e-3;
  for (int iter = 0; iter < opt.max_iter; ++iter) {
    res.iterations = iter + 1;
    Eigen::VectorXd g = numeric_gradient(fn, res.x, 1e-5, &res.evals);
    // forward-difference Hessian from gradients, symmetrized
    Eigen::MatrixXd H(p, p);
    Eigen::VectorXd xp = res.x;
    for (int j = 0; j < p; ++j) {
      double h = 1e-4 * std::max(1.0, std::abs(res.x[j]));
      xp[j] = res.x[j] + h;
      Eigen::VectorXd gj = numeric_gradient(fn, xp, 1e-5, &res.evals);
      xp[j] = res.x[j];
      H.col(j) = (gj - g) / h;
    }
    H = 0.5 * (H + H.transpose());

    bool accepted = false;
    for (int tries = 0; tries < 25; ++tries) {
      Eigen::MatrixXd Hd = H + lambda * Eigen::MatrixXd::Identity(p, p);
      Eigen::LLT<Eigen::MatrixXd> llt(Hd);
      if (llt.info() != Eigen::Success) {
        lambda *= 10;
        continue;
      }
      Eigen::VectorXd step = llt.solve(-g);
      Eigen::VectorXd xnew = res.x + step;
      double fnew = fn(xnew);
      ++res.evals;
      if (std::isfinite(fnew) && fnew < res.f) {
        double df = res.f - fnew;
        double dx = step.lpNorm<Eigen::Infinity>();
        res.x = xnew;
        res.f = fnew;
        lambda = std::max(lambda * 0.3, 1e-10);
        accepted = true;
        if (dx < opt.step_tol && df < opt.f_tol) {
          res.converged = true;
          return res;
        }
        break;
      }
      lambda *= 10;
    }
    if (!accepted) {
      res.converged = g.lpNorm<Eigen::Infinity>() < 1e-5;
      if (!res.converged) res.message = "damping failed to find decrease";
      return res;
    }
  }
  res.message = "iteration cap reached";
  return res;
}

OptimResult minimize_by_name(const std::string& name, const ObjectiveFn& fn,
                             const Eigen::VectorXd& x0, const OptimOptions& opt) {
  if (name == "qn") return minimize_bfgs(fn, x0, opt);
  if (name == "nm") return minimize_nelder_mead(fn, x0, opt);
  if (name == "tr") return minimize_damped_newton(fn, x0, opt);
  throw std::invalid_argument("unknown optimizer: " + name +
                              " (expected one of qn, nm, tr)");
}

}  // namespace arrcp
