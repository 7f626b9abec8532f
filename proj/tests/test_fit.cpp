#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "arrcp/fit.hpp"
#include "support.hpp"

using namespace arrcp;
using testsupport::make_sim_panel;
using testsupport::realistic_params;

TEST_CASE("free parameter layout follows the model spec") {
  CHECK(free_parameter_names(ModelSpec{}) ==
        std::vector<std::string>{"beta0", "beta1", "beta2", "beta3", "sigma", "phi1"});
  CHECK(free_parameter_names(ModelSpec{true, false}) ==
        std::vector<std::string>{"beta0", "beta1", "beta2", "beta3", "sigma"});
  CHECK(free_parameter_names(ModelSpec{false, false}) ==
        std::vector<std::string>{"beta0", "beta1", "beta2", "beta3"});
  ParameterSet p = realistic_params();
  auto v = free_parameter_values(ModelSpec{}, p);
  CHECK(v == std::vector<double>{p.beta[0], p.beta[1], p.beta[2], p.beta[3], p.sigma,
                                 p.phi1});
}

TEST_CASE("GLM start solves the fixed-effects model") {
  ParameterSet truth = realistic_params();
  truth.sigma = 0;
  truth.phi1 = 0;
  ModelSpec none{false, false};
  PanelDataset panel = make_sim_panel(4, 84, truth, 31, none);
  ModelFrame frame = make_frame(panel, none);
  Eigen::Vector4d beta = glm_poisson_start(frame);
  // IRLS stationarity: score of the Poisson GLM is ~0 at the solution
  ParameterSet at;
  at.beta = beta;
  Eigen::VectorXd g = joint_gradient(at, zero_state(frame), frame);
  CHECK(g.head<4>().cwiseAbs().maxCoeff() / double(frame.n) <= 1e-8);
  CHECK((beta - truth.beta).cwiseAbs().maxCoeff() <= 0.5);
}

TEST_CASE("optimizers agree and the reference is the best log-likelihood") {
  ParameterSet truth = realistic_params();
  PanelDataset panel = make_sim_panel(4, 56, truth, 7);
  FitResult r = fit(ModelSpec{}, panel, {"qn", "nm", "tr"}, 7);
  REQUIRE(r.per_optimizer.size() == 3);
  double best = -1e300;
  for (const auto& o : r.per_optimizer) {
    CHECK(o.success);
    best = std::max(best, o.loglik);
  }
  // the reference value is re-evaluated at the winning parameters, so allow
  // last-bit differences from the recorded per-optimizer value
  CHECK(r.loglik == doctest::Approx(best).epsilon(1e-12));
  CHECK(r.loglik >= best - 1e-6);
  for (const auto& [name, cv] : r.convergence_cv) {
    INFO("cv for ", name);
    CHECK(std::abs(cv) < 0.05);
  }
  // all three found the same optimum
  for (const auto& o : r.per_optimizer)
    CHECK(o.loglik == doctest::Approx(r.loglik).epsilon(1e-6));
}

TEST_CASE("fits are bitwise deterministic") {
  ParameterSet truth = realistic_params();
  PanelDataset panel = make_sim_panel(3, 42, truth, 13);
  FitResult a = fit(ModelSpec{}, panel, {"qn", "nm"}, 99);
  FitResult b = fit(ModelSpec{}, panel, {"qn", "nm"}, 99);
  CHECK(a.params.beta == b.params.beta);
  CHECK(a.params.sigma == b.params.sigma);
  CHECK(a.params.phi1 == b.params.phi1);
  CHECK(a.loglik == b.loglik);
  CHECK(a.re_mode.u == b.re_mode.u);
  CHECK(a.re_mode.v == b.re_mode.v);
}

TEST_CASE("golden-rule CV hand value") {
  ModelSpec none{false, false};
  auto run = [&](double b0) {
    OptimizerRun o;
    o.success = true;
    o.params.beta << b0, 2.0, 2.0, 2.0;
    o.loglik = -1;
    return o;
  };
  std::vector<OptimizerRun> runs{run(1.0), run(1.0), run(1.2)};
  auto cv = golden_rule_cv(none, runs);
  // sd{1,1,1.2} / mean{1,1,1.2} = 0.1154701 / 1.0666667
  CHECK(cv.at("beta0") == doctest::Approx(0.10825318).epsilon(1e-6));
  CHECK(cv.at("beta1") == doctest::Approx(0.0).epsilon(1e-15));

  runs[2].success = false;
  CHECK(golden_rule_cv(none, runs).at("beta0") == doctest::Approx(0.0).epsilon(1e-15));
  runs[1].success = false;
  CHECK_THROWS(golden_rule_cv(none, runs));

  // signed mean: a negative-mean parameter keeps its sign in the CV
  std::vector<OptimizerRun> neg{run(-1.0), run(-1.0), run(-1.2)};
  CHECK(golden_rule_cv(none, neg).at("beta0") ==
        doctest::Approx(-0.10825318).epsilon(1e-6));
}

TEST_CASE("nested models never gain log-likelihood by losing terms") {
  ParameterSet truth = realistic_params();
  PanelDataset panel = make_sim_panel(4, 56, truth, 17);
  double full = fit(ModelSpec{}, panel, {"qn"}, 1).loglik;
  double nointercept = fit(ModelSpec{false, true}, panel, {"qn"}, 1).loglik;
  double noslope = fit(ModelSpec{true, false}, panel, {"qn"}, 1).loglik;
  double none = fit(ModelSpec{false, false}, panel, {"qn"}, 1).loglik;
  CHECK(full >= noslope - 1e-6);
  CHECK(full >= nointercept - 1e-6);
  CHECK(noslope >= none - 1e-6);
  CHECK(nointercept >= none - 1e-6);
}

TEST_CASE("offset equivariance: rescaling exposure only shifts the intercept") {
  ParameterSet truth = realistic_params();
  PanelDataset panel = make_sim_panel(3, 42, truth, 23);
  PanelDataset scaled = panel;
  const double c = 10.0;
  for (auto& v : scaled.offset) v *= c;
  FitResult a = fit(ModelSpec{}, panel, {"qn"}, 5);
  FitResult b = fit(ModelSpec{}, scaled, {"qn"}, 5);
  CHECK(b.params.beta[0] == doctest::Approx(a.params.beta[0] - std::log(c)).epsilon(5e-5));
  for (int j = 1; j < 4; ++j)
    CHECK(b.params.beta[j] == doctest::Approx(a.params.beta[j]).epsilon(5e-5));
  CHECK(b.params.sigma == doctest::Approx(a.params.sigma).epsilon(5e-4));
}

TEST_CASE("warm refit reproduces the cold optimum") {
  ParameterSet truth = realistic_params();
  PanelDataset panel = make_sim_panel(3, 42, truth, 29);
  FitResult cold = fit(ModelSpec{}, panel, {"qn"}, 3);
  ModelFrame frame = make_frame(panel, ModelSpec{});
  ParameterSet warm = refit_warm(frame, cold.params);
  CHECK((warm.beta - cold.params.beta).cwiseAbs().maxCoeff() <= 1e-4);
  CHECK(warm.sigma == doctest::Approx(cold.params.sigma).epsilon(1e-3));
}

TEST_CASE("unknown optimizer names fail loudly") {
  ParameterSet truth = realistic_params();
  PanelDataset panel = make_sim_panel(2, 14, truth, 2);
  CHECK_THROWS(fit(ModelSpec{}, panel, {"bogus"}, 1));
  CHECK_THROWS(fit(ModelSpec{}, panel, {}, 1));
}

TEST_CASE("fitted values respect scale identities") {
  ParameterSet truth = realistic_params();
  PanelDataset panel = make_sim_panel(3, 28, truth, 37);
  FitResult r = fit(ModelSpec{}, panel, {"qn"}, 11);
  FittedValues fv = predict_fitted(r, panel);
  REQUIRE(fv.mu.size() == panel.n());
  for (size_t i = 0; i < panel.n(); ++i) {
    CHECK(fv.rate[i] == doctest::Approx(fv.mu[i] / panel.offset[i]).epsilon(1e-12));
    CHECK(fv.rate_100k[i] == doctest::Approx(1e5 * fv.rate[i]).epsilon(1e-12));
    CHECK(fv.mu[i] > 0);
  }
}

TEST_CASE("fit.json round trip preserves the result exactly") {
  ParameterSet truth = realistic_params();
  PanelDataset panel = make_sim_panel(3, 28, truth, 41);
  FitResult r = fit(ModelSpec{}, panel, {"qn", "nm"}, 19);
  std::string path = "/tmp/arrcp_test_fit.json";
  save_fit(r, panel, path);
  FitResult q = load_fit(panel, path);
  std::remove(path.c_str());
  CHECK(q.params.beta == r.params.beta);
  CHECK(q.params.sigma == r.params.sigma);
  CHECK(q.params.phi1 == r.params.phi1);
  CHECK(q.loglik == r.loglik);
  CHECK(q.seed == r.seed);
  CHECK(q.reference_optimizer == r.reference_optimizer);
  CHECK(q.re_mode.u == r.re_mode.u);
  CHECK(q.re_mode.v == r.re_mode.v);
  CHECK(q.convergence_cv == r.convergence_cv);
}
