// Acceptance suite: one pass/fail line per criterion, pinned tolerances.
// Usage: acceptance <path-to-arrcp-cli> [criterion]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "arrcp/diagnostics.hpp"
#include "arrcp/forecast.hpp"
#include "arrcp/risk.hpp"
#include "arrcp/uncertainty.hpp"
#include "support.hpp"

using namespace arrcp;
using testsupport::make_sim_panel;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s - %s\n", criterion, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

ParameterSet table_truth() {
  ParameterSet p;
  p.beta << -10.6206, 1.7776, 0.3551, 1.1910;
  p.sigma = 0.2075;
  p.phi1 = 1.1906;
  return p;
}

// ---------------------------------------------------------------------------
// Independent quadrature oracle: Gauss-Hermite by Golub-Welsch, tensor product
// over the q <= 3 random effects with log-sum-exp accumulation.

struct GaussHermite {
  Eigen::VectorXd x, w;
};

GaussHermite gauss_hermite(int n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k + 1 < n; ++k) {
    double b = std::sqrt(double(k + 1) / 2.0);
    J(k, k + 1) = b;
    J(k + 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussHermite gh;
  gh.x = es.eigenvalues();
  gh.w.resize(n);
  double sqrt_pi = std::sqrt(M_PI);
  for (int i = 0; i < n; ++i) {
    double v0 = es.eigenvectors()(0, i);
    gh.w[i] = sqrt_pi * v0 * v0;
  }
  return gh;
}

double cond_loglik(const ParameterSet& p, const RandomEffectState& re,
                   const ModelFrame& f) {
  double ll = 0;
  for (int i = 0; i < f.n; ++i)
    ll += poisson_loglik(f.y[size_t(i)], std::exp(linear_predictor(p, re, f, i)));
  return ll;
}

double gh_marginal_loglik(const ParameterSet& p, const ModelFrame& f, int nodes) {
  int q = f.q();
  GaussHermite gh = gauss_hermite(nodes);
  double inv_sqrt_pi_q = -0.5 * double(q) * std::log(M_PI);

  std::vector<int> idx(size_t(q), 0);
  double max_term = -1e300;
  std::vector<double> terms;
  for (;;) {
    RandomEffectState re = zero_state(f);
    double logw = inv_sqrt_pi_q;
    for (int d = 0; d < q; ++d) {
      double z = std::sqrt(2.0) * gh.x[idx[size_t(d)]];
      logw += std::log(gh.w[idx[size_t(d)]]);
      if (f.spec.random_intercept && d < f.n_u)
        re.u[d] = z;
      else
        re.v[d - (f.spec.random_intercept ? f.n_u : 0)] = z;
    }
    double t = logw + cond_loglik(p, re, f);
    terms.push_back(t);
    max_term = std::max(max_term, t);

    int d = 0;
    while (d < q && ++idx[size_t(d)] == nodes) idx[size_t(d++)] = 0;
    if (d == q) break;
  }
  double s = 0;
  for (double t : terms) s += std::exp(t - max_term);
  return max_term + std::log(s);
}

// ---------------------------------------------------------------------------

void criterion_1() {
  auto t0 = Clock::now();
  ParameterSet truth = testsupport::realistic_params();
  int instances = 0;
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 18; ++seed) {
    struct Shape {
      int T;
      bool slope;
    };
    for (Shape s : {Shape{7, false}, Shape{7, true}, Shape{14, true}}) {
      ModelSpec spec;
      spec.random_slope = s.slope;
      PanelDataset p = make_sim_panel(1, s.T, truth, seed * 31 + s.T, spec);
      ModelFrame f = make_frame(p, spec);
      // the criterion is stated for counts <= 50
      if (*std::max_element(f.y.begin(), f.y.end()) > 50.0) continue;
      double exact = gh_marginal_loglik(truth, f, 32);
      double lap = laplace_marginal_loglik(truth, f).value;
      worst = std::max(worst, std::abs(lap - exact));
      ++instances;
    }
  }
  double el = seconds_since(t0);
  report(1, worst <= 5e-3 && instances >= 50 && el < 60,
         "Laplace vs 32-node Gauss-Hermite on " + std::to_string(instances) +
             " instances (q <= 3): max |diff| " + fmt(worst) + " <= 5e-3, " +
             fmt(el) + "s < 60s");
}

void criterion_2() {
  auto t0 = Clock::now();
  ParameterSet truth = testsupport::realistic_params();
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ModelSpec spec;
    spec.random_slope = seed % 3 != 0;
    PanelDataset panel = make_sim_panel(2, 10, truth, seed, spec);
    ModelFrame f = make_frame(panel, spec);
    Rng rng(seed, 77);
    ParameterSet p = truth;
    for (int j = 0; j < 4; ++j) p.beta[j] += 0.05 * rng.normal();
    RandomEffectState re = zero_state(f);
    for (int k = 0; k < f.n_u; ++k) re.u[k] = 0.5 * rng.normal();
    for (int a = 0; a < f.D; ++a) re.v[a] = 0.5 * rng.normal();

    Eigen::VectorXd g = joint_gradient(p, re, f);
    int nu = spec.random_intercept ? f.n_u : 0;
    int nv = spec.random_slope ? f.D : 0;
    int dim = 6 + nu + nv;
    auto eval = [&](const Eigen::VectorXd& x) {
      ParameterSet pp = p;
      RandomEffectState rr = re;
      for (int j = 0; j < 4; ++j) pp.beta[j] = x[j];
      pp.sigma = x[4];
      pp.phi1 = x[5];
      for (int k = 0; k < nu; ++k) rr.u[k] = x[6 + k];
      for (int a = 0; a < nv; ++a) rr.v[a] = x[6 + nu + a];
      return joint_penalized_loglik(pp, rr, f);
    };
    Eigen::VectorXd x0(dim);
    x0.head<4>() = p.beta;
    x0[4] = p.sigma;
    x0[5] = p.phi1;
    if (nu > 0) x0.segment(6, nu) = re.u;
    if (nv > 0) x0.segment(6 + nu, nv) = re.v;
    double scale = std::max(1.0, g.norm());
    for (int j = 0; j < dim; ++j) {
      double h = 1e-6 * std::max(1.0, std::abs(x0[j]));
      Eigen::VectorXd xp = x0, xm = x0;
      xp[j] += h;
      xm[j] -= h;
      double fd = (eval(xp) - eval(xm)) / (2 * h);
      worst = std::max(worst, std::abs(g[j] - fd) / scale);
    }
  }
  double el = seconds_since(t0);
  report(2, worst <= 1e-6 && el < 10,
         "analytic vs central-difference gradients on 20 instances: max relative"
         " error " +
             fmt(worst) + " <= 1e-6, " + fmt(el) + "s < 10s");
}

bool criterion_3() {
  auto t0 = Clock::now();
  ParameterSet truth = table_truth();
  const int S = 50;
  Eigen::Vector4d beta_sum = Eigen::Vector4d::Zero();
  double sigma_sum = 0, phi_sum = 0;
  for (int s = 0; s < S; ++s) {
    PanelDataset panel = make_sim_panel(11, 182, truth, 300 + std::uint64_t(s));
    // double the x1 signal so the random slope is well identified at D = 11,
    // then resimulate the counts under the reference truth
    for (double& v : panel.x1) v *= 2.0;
    ModelFrame f = make_frame(panel, ModelSpec{});
    Rng rng(300 + std::uint64_t(s), 5);
    simulate_counts(truth, f, rng, nullptr);
    for (size_t i = 0; i < panel.n(); ++i) panel.y[i] = f.y[i];
    FitResult r = fit(ModelSpec{}, panel, {"qn"}, 300 + std::uint64_t(s));
    beta_sum += r.params.beta;
    sigma_sum += r.params.sigma;
    phi_sum += r.params.phi1;
  }
  Eigen::Vector4d beta_mean = beta_sum / S;
  double sigma_mean = sigma_sum / S, phi_mean = phi_sum / S;

  // reference 95% interval half-widths (max of the two sides)
  const double half[4] = {0.1349, 0.9488, 0.1042, 0.1602};
  bool ok = true;
  std::string detail = "mean over 50 sims of 11 areas x 182 days:";
  for (int j = 0; j < 4; ++j) {
    double dev = std::abs(beta_mean[j] - truth.beta[j]);
    ok = ok && dev <= half[j];
    detail += " |b" + std::to_string(j) + " dev| " + fmt(dev) + "<=" + fmt(half[j]);
  }
  double r0 = std::abs(beta_mean[0] - truth.beta[0]) / std::abs(truth.beta[0]);
  double rs = std::abs(sigma_mean - truth.sigma) / truth.sigma;
  double rp = std::abs(phi_mean - truth.phi1) / truth.phi1;
  ok = ok && r0 <= 0.10 && rs <= 0.10 && rp <= 0.10;
  double el = seconds_since(t0);
  ok = ok && el <= 1800;
  detail += ", rel dev b0 " + fmt(r0) + " sigma " + fmt(rs) + " phi1 " + fmt(rp) +
            " <= 0.10, " + fmt(el) + "s <= 1800s";
  report(3, ok, detail);
  return ok;
}

void criterion_5() {
  auto t0 = Clock::now();
  ParameterSet truth = table_truth();
  BootstrapConfig cfg;
  cfg.B1 = 200;
  cfg.B2 = 30;
  cfg.alpha = 0.05;
  const int trials = 100;
  int covered = 0;
  for (int s = 0; s < trials; ++s) {
    PanelDataset panel = make_sim_panel(4, 56, truth, 700 + std::uint64_t(s));
    FitResult r = fit(ModelSpec{}, panel, {"qn"}, 700 + std::uint64_t(s));
    cfg.seed = 700 + std::uint64_t(s);
    CiTable ci = double_bootstrap_t_ci(r, panel, cfg);
    if (ci.lower[3] <= truth.beta[3] && truth.beta[3] <= ci.upper[3]) ++covered;
  }
  double share = double(covered) / trials;
  double el = seconds_since(t0);
  report(5, share >= 0.85 && share <= 0.99,
         "t-percentile 95% CI (B1=200, B2=30) covers beta3 in " + fmt(100 * share) +
             "% of 100 trials at 4 areas x 8 weeks, band [85%, 99%], " + fmt(el) +
             "s");
}

struct SharedFit {
  PanelDataset panel;
  FitResult r;
};

SharedFit full_scale_fit() {
  SharedFit s{make_sim_panel(11, 182, table_truth(), 42), {}};
  s.r = fit(ModelSpec{}, s.panel, {"qn"}, 42);
  return s;
}

void criterion_6(const SharedFit& s) {
  auto t0 = Clock::now();
  BootstrapConfig cfg;
  cfg.B_rmse = 200;
  cfg.seed = 42;
  RmseTable t = bootstrap_rmse_fit(s.r, s.panel, cfg);
  double mean = 100 * t.rel_summary.mean;
  auto sorted = t.rel_rmse;
  std::sort(sorted.begin(), sorted.end());
  double lo = 100 * quantile_type7(sorted, 0.125);
  double hi = 100 * quantile_type7(sorted, 0.875);
  // desk profile (B=200, simulated panel): doubled tolerance around the
  // reference 10% average, and the central 75% band must overlap the reference
  // [6.626%, 12.308%] spread
  bool mean_ok = mean >= 4.0 && mean <= 16.0;
  bool band_ok = lo <= 12.308 && hi >= 6.626;
  report(6, mean_ok && band_ok,
         "relative RMSE (B=200 desk profile): mean " + fmt(mean) +
             "% in [4%, 16%], central 75% band [" + fmt(lo) + "%, " + fmt(hi) +
             "%] overlaps [6.626%, 12.308%], " + fmt(seconds_since(t0)) + "s");
}

bool criterion_7(const SharedFit& s) {
  DiagnosticsReport rep = diagnose(s.r, s.panel);
  double var = 0;
  for (double r : rep.pearson) var += r * r;
  var /= double(rep.pearson.size());
  bool ok = rep.share_within_band >= 0.75 && var >= 0.5 && var <= 1.5;
  report(7, ok,
         "well-specified simulated fit: " + fmt(100 * rep.share_within_band) +
             "% of Pearson residuals in [-1.5, 1.5] (>= 75%), residual variance " +
             fmt(var) + " in [0.5, 1.5]");
  return ok;
}

void criterion_8() {
  ParameterSet truth = testsupport::realistic_params();
  PanelDataset panel = make_sim_panel(3, 42, truth, 15);
  Date origin = panel.day(30);
  PanelDataset sl = panel.slice(panel.start, origin);
  FitResult r = fit(ModelSpec{}, sl, {"qn"}, 15);

  auto before = predict_forward(r, panel, origin, {1, 2, 3, 4, 5, 6, 7});
  PanelDataset corrupted = panel;
  for (int a = 0; a < panel.D(); ++a)
    for (int t = 31; t < panel.T; ++t) {
      corrupted.y[panel.idx(a, t)] = 9999;
      corrupted.x1[panel.idx(a, t)] = 99.9;
      corrupted.x2[panel.idx(a, t)] = 99.9;
      corrupted.x3[panel.idx(a, t)] = 99.9;
    }
  auto after = predict_forward(r, corrupted, origin, {1, 2, 3, 4, 5, 6, 7});
  bool ok = before.size() == after.size();
  for (size_t i = 0; ok && i < before.size(); ++i)
    ok = before[i].pred_count == after[i].pred_count &&
         before[i].imputed_x == after[i].imputed_x &&
         before[i].imputed_u == after[i].imputed_u;
  report(8, ok,
         "corrupting every post-origin observation leaves all 21 forecasts at the"
         " origin bit-exact");
}

void criterion_9() {
  auto t0 = Clock::now();
  ParameterSet truth = testsupport::realistic_params();

  int cases = 0, ordered = 0;
  for (int s = 0; s < 20; ++s) {
    PanelDataset panel = make_sim_panel(3, 112, truth, 900 + std::uint64_t(s));
    auto ro = rolling_origin_run(panel, panel.day(83), panel.day(111), {1, 7}, 7,
                                 900 + std::uint64_t(s));
    for (size_t a = 0; a < ro.areas.size(); ++a) {
      if (!std::isfinite(ro.rmse[a][0]) || !std::isfinite(ro.rmse[a][1])) continue;
      ++cases;
      if (ro.rmse[a][1] >= ro.rmse[a][0]) ++ordered;
    }
  }
  double share = double(ordered) / double(cases);

  // bootstrap widening at a mid-week origin (day 52 is 4 days into week 7)
  PanelDataset panel = make_sim_panel(3, 53, truth, 33);
  FitResult r = fit(ModelSpec{}, panel, {"qn"}, 33);
  BootstrapConfig cfg;
  cfg.B_forecast = 50;
  cfg.seed = 33;
  ForecastRmse fr = forecast_rmse_bootstrap(r, panel, panel.day(52), {3, 7}, cfg);
  bool wider = true;
  for (size_t a = 0; a < fr.rmse.size(); ++a) wider = wider && fr.rmse[a][1] > fr.rmse[a][0];

  report(9, share >= 0.80 && wider,
         "realized RMSE h=7 >= h=1 in " + fmt(100 * share) + "% of " +
             std::to_string(cases) + " area-cases (>= 80%); bootstrap RMSE (B=50)"
             " strictly wider at h=7 than h=3 for every area: " +
             (wider ? "yes" : "no") + ", " + fmt(seconds_since(t0)) + "s");
}

void criterion_10() {
  // exhaustive grid vs the brute-force interval-scan oracle
  RiskThresholds t = default_thresholds();
  auto scan = [&](double rate) {
    std::vector<double> lo{0.0};
    for (double c : t.cuts) lo.push_back(c);
    for (int i = int(lo.size()) - 1; i >= 0; --i)
      if (rate >= lo[size_t(i)]) return i;
    return 0;
  };
  bool grid_ok = true;
  int prev = 0;
  for (int k = 0; k < 10000; ++k) {
    double rate = 20.0 * k / 9999.0;
    int got = categorize(rate, t);
    grid_ok = grid_ok && got == scan(rate) && got >= prev;
    prev = got;
  }
  for (size_t i = 0; i < t.cuts.size(); ++i)
    grid_ok = grid_ok && categorize(t.cuts[i], t) == int(i) + 1;

  // low-circulation scenario on the full pipeline: observed vs h=7 prediction
  // for 2021-10-16 agree at the lowest level in every area
  ParameterSet low;
  low.beta << -12.5, 1.0, 0.3, 0.5;
  low.sigma = 0.1;
  low.phi1 = 0.3;
  PanelDataset panel = make_sim_panel(4, 350, low, 1016);
  Date date = parse_date("2021-10-16");
  int ti = days_between(panel.start, date);
  std::vector<double> observed;
  for (int a = 0; a < panel.D(); ++a)
    observed.push_back(1e5 * panel.y[panel.idx(a, ti)] / panel.offset[panel.idx(a, ti)]);
  Date origin = date - std::chrono::days(7);
  PanelDataset window = panel.slice(panel.start, origin);
  FitResult r = fit(ModelSpec{}, window, {"qn"}, 1016);
  auto recs = predict_forward(r, window, origin, {7});
  std::vector<double> predicted(size_t(panel.D()), 0.0);
  for (const auto& rec : recs) {
    auto it = std::find(panel.areas.begin(), panel.areas.end(), rec.area_id);
    predicted[size_t(it - panel.areas.begin())] = rec.pred_rate_100k;
  }
  RiskMapDocument obs = make_risk_document(date, "observed", panel.areas, observed, t);
  RiskMapDocument pred = make_risk_document(date, "predicted-7", panel.areas, predicted, t);
  RiskComparison cmp = compare_risk(obs, pred);
  bool scenario_ok = cmp.exact_matches == panel.D();
  for (const auto& e : obs.entries) scenario_ok = scenario_ok && e.level_index == 0;
  for (const auto& e : pred.entries) scenario_ok = scenario_ok && e.level_index == 0;

  report(10, grid_ok && scenario_ok,
         "categorize matches the interval-scan oracle and is monotone on a 10000-"
         "rate grid with cut points on the upper level; 2021-10-16 low-circulation"
         " scenario: observed and h=7 predictions agree at the lowest level in all " +
             std::to_string(panel.D()) + " areas");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void criterion_11(const std::string& cli) {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "arrcp_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::string d = dir.string();

  ParameterSet truth = testsupport::realistic_params();
  PanelDataset panel = make_sim_panel(3, 56, truth, 77);
  write_panel(panel, d + "/panel.csv");
  {
    std::ofstream out(d + "/bounds.geojson");
    out << R"({"type":"FeatureCollection","features":[)";
    for (int a = 0; a < panel.D(); ++a)
      out << (a ? "," : "")
          << R"({"type":"Feature","properties":{"area_id":")" << panel.areas[size_t(a)]
          << R"("},"geometry":{"type":"Point","coordinates":[)" << a << ",0]}}";
    out << "]}";
  }

  auto run = [&](const std::string& args) {
    std::string cmd = "\"" + cli + "\" " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  bool ok = true;
  std::string p = d + "/panel.csv";
  ok = ok && run("fit --panel " + p + " --out " + d + "/fit_a.json --seed 7");
  ok = ok && run("fit --panel " + p + " --out " + d + "/fit_b.json --seed 7");
  ok = ok && slurp(d + "/fit_a.json") == slurp(d + "/fit_b.json");

  std::string boot = " --panel " + p + " --fit " + d + "/fit_a.json --seed 7";
  ok = ok && run("ci" + boot + " --B1 8 --B2 4 --out " + d + "/ci1.csv --threads 1");
  ok = ok && run("ci" + boot + " --B1 8 --B2 4 --out " + d + "/ci8.csv --threads 8");
  ok = ok && slurp(d + "/ci1.csv") == slurp(d + "/ci8.csv");

  ok = ok && run("rmse" + boot + " --B 16 --out " + d + "/rm1.csv --threads 1");
  ok = ok && run("rmse" + boot + " --B 16 --out " + d + "/rm8.csv --threads 8");
  ok = ok && slurp(d + "/rm1.csv") == slurp(d + "/rm8.csv");

  std::string fc = " --panel " + p + " --fit-end 2020-12-20 --eval-end 2020-12-27"
                   " --horizons 1:7 --refit-every 1 --seed 7";
  ok = ok && run("forecast" + fc + " --out " + d + "/fc1.csv --threads 1");
  ok = ok && run("forecast" + fc + " --out " + d + "/fc8.csv --threads 8");
  ok = ok && slurp(d + "/fc1.csv") == slurp(d + "/fc8.csv");

  std::string fr = boot + " --origin 2020-12-27 --horizons 3,7 --B 16";
  ok = ok && run("forecast-rmse" + fr + " --out " + d + "/fr1.csv --threads 1");
  ok = ok && run("forecast-rmse" + fr + " --out " + d + "/fr8.csv --threads 8");
  ok = ok && slurp(d + "/fr1.csv") == slurp(d + "/fr8.csv");

  std::string rk = "riskmap --panel " + p + " --date 2020-12-20 --kind observed"
                   " --boundaries " + d + "/bounds.geojson --seed 7";
  ok = ok && run(rk + " --out " + d + "/map_a.geojson");
  ok = ok && run(rk + " --out " + d + "/map_b.geojson");
  ok = ok && slurp(d + "/map_a.geojson") == slurp(d + "/map_b.geojson");

  ok = ok && !slurp(d + "/fit_a.json").empty();
  fs::remove_all(dir);
  report(11, ok,
         "CLI fit/ci/rmse/forecast/forecast-rmse/riskmap with a fixed --seed:"
         " byte-identical outputs across two runs and across --threads 1 vs 8");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <arrcp-cli-path> [criterion]\n";
    return 2;
  }
  std::string cli = argv[1];
  int only = argc > 2 ? std::atoi(argv[2]) : 0;
  auto want = [&](int k) { return only == 0 || only == k; };

  bool ok3 = false, ok7 = false;
  if (want(1)) criterion_1();
  if (want(2)) criterion_2();
  if (want(3) || want(4)) ok3 = criterion_3();
  if (want(5)) criterion_5();
  if (want(6) || want(7) || want(4)) {
    SharedFit s = full_scale_fit();
    if (want(6)) criterion_6(s);
    if (want(7) || want(4)) ok7 = criterion_7(s);
  }
  if (want(4))
    report(4, ok3 && ok7,
           "reference dataset unavailable: substituted by criterion 3 (parameter"
           " recovery at paper scale) plus criterion 7 (residual band property),"
           " as the criterion prescribes");
  if (want(8)) criterion_8();
  if (want(9)) criterion_9();
  if (want(10)) criterion_10();
  if (want(11)) criterion_11(cli);

  std::printf("%s (%d failure%s)\n", g_failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL",
              g_failures, g_failures == 1 ? "" : "s");
  return g_failures == 0 ? 0 : 1;
}
