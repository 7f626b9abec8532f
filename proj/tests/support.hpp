#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "arrcp/model.hpp"
#include "arrcp/rng.hpp"
#include "arrcp/uncertainty.hpp"

namespace arrcp::testsupport {

// Synthetic area x day panel with smooth covariates in realistic model units
// and counts simulated from the ARRCP model at `truth`.
inline PanelDataset make_sim_panel(int D, int T, const ParameterSet& truth,
                                   std::uint64_t seed,
                                   const ModelSpec& spec = ModelSpec{}) {
  PanelDataset p;
  p.start = parse_date("2020-11-02");
  p.week_origin = p.start;
  p.T = T;
  for (int a = 0; a < D; ++a) p.areas.push_back("A" + std::to_string(a + 1));
  size_t n = size_t(D) * size_t(T);
  p.y.assign(n, 0.0);
  p.offset.resize(n);
  p.x1.resize(n);
  p.x2.resize(n);
  p.x3.resize(n);
  p.w.resize(n);
  p.ep.resize(n);
  for (int a = 0; a < D; ++a) {
    double pop = 1e5 + 2e4 * a;
    // smooth seasonal base plus a small persistent random-walk component so
    // the covariates carry genuine forecast uncertainty
    Rng xrng(seed, 1000 + std::uint64_t(a));
    double rw1 = 0, rw2 = 0, rw3 = 0;
    for (int t = 0; t < T; ++t) {
      size_t i = p.idx(a, t);
      double phase = 0.7 * a;
      rw1 += 0.004 * xrng.normal();
      rw2 += 0.002 * xrng.normal();
      rw3 += 0.010 * xrng.normal();
      p.offset[i] = pop;
      p.x1[i] = std::max(0.0, 0.15 + 0.10 * std::sin(0.05 * t + phase) + rw1);
      p.x2[i] = std::max(0.0, 0.10 + 0.05 * std::cos(0.04 * t + phase) + rw2);
      p.x3[i] = std::max(0.0, 0.50 + 0.30 * std::sin(0.03 * t + 1.3 * phase) + rw3);
      p.w[i] = t / 7;
      p.ep[i] = epidemic_period(p.day(t));
    }
  }
  ModelFrame frame = make_frame(p, spec);
  Rng rng(seed, 0);
  simulate_counts(truth, frame, rng, nullptr);
  for (size_t i = 0; i < n; ++i) p.y[i] = frame.y[i];
  p.validate();
  return p;
}

inline ParameterSet realistic_params() {
  ParameterSet truth;
  truth.beta << -9.5, 1.8, 0.35, 1.2;
  truth.sigma = 0.2;
  truth.phi1 = 1.2;
  return truth;
}

}  // namespace arrcp::testsupport
