// arrcp: fit, uncertainty, diagnostics, forecasting and risk-map emission for
// the area-level Poisson mixed model with random regression coefficients.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "arrcp/csv.hpp"
#include "arrcp/diagnostics.hpp"
#include "arrcp/forecast.hpp"
#include "arrcp/risk.hpp"
#include "arrcp/uncertainty.hpp"

using namespace arrcp;
using ordered_json = nlohmann::ordered_json;

namespace {

struct GlobalConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  std::vector<std::string> optimizers{"qn", "nm", "tr"};
  BootstrapConfig boot;
  RiskThresholds thresholds = default_thresholds();
};

void apply_config_file(GlobalConfig& g, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  ordered_json j = ordered_json::parse(in);
  if (j.contains("optimizers")) g.optimizers = j["optimizers"].get<std::vector<std::string>>();
  if (j.contains("B_rmse")) g.boot.B_rmse = j["B_rmse"].get<int>();
  if (j.contains("B1")) g.boot.B1 = j["B1"].get<int>();
  if (j.contains("B2")) g.boot.B2 = j["B2"].get<int>();
  if (j.contains("B_forecast")) g.boot.B_forecast = j["B_forecast"].get<int>();
  if (j.contains("alpha")) g.boot.alpha = j["alpha"].get<double>();
  if (j.contains("thresholds")) {
    const auto& t = j["thresholds"];
    g.thresholds.levels = t.at("levels").get<std::vector<std::string>>();
    g.thresholds.cuts = t.at("cuts").get<std::vector<double>>();
    g.thresholds.provenance = t.value("provenance", std::string{});
    g.thresholds.validate();
  }
}

std::vector<int> parse_horizons(const std::string& s) {
  std::vector<int> out;
  auto colon = s.find(':');
  if (colon != std::string::npos) {
    int a = std::stoi(s.substr(0, colon)), b = std::stoi(s.substr(colon + 1));
    for (int h = a; h <= b; ++h) out.push_back(h);
  } else {
    size_t pos = 0;
    while (pos < s.size()) {
      size_t comma = s.find(',', pos);
      if (comma == std::string::npos) comma = s.size();
      out.push_back(std::stoi(s.substr(pos, comma - pos)));
      pos = comma + 1;
    }
  }
  if (out.empty()) throw CLI::ValidationError("--horizons", "no horizons in " + s);
  return out;
}

std::map<std::string, double> read_population(const std::string& path) {
  CsvTable csv = read_csv(path);
  int ca = csv.column("area_id"), cp = csv.column("population");
  if (ca < 0 || cp < 0)
    throw std::runtime_error(path + " needs area_id and population columns");
  std::map<std::string, double> out;
  for (const auto& row : csv.rows)
    out[row[size_t(ca)]] = parse_double(row[size_t(cp)], "population");
  return out;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

int run(int argc, char** argv) {
  CLI::App app{"area-level Poisson mixed model with random regression coefficients"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalConfig g;
  std::string config_path;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads")->capture_default_str();
  app.add_option("--config", config_path, "JSON config (optimizers, bootstrap sizes, thresholds)");

  // ingest ------------------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "assemble the area x day panel from raw series");
  std::string raw_path, pop_path, out_path, start_s, end_s, study_s, icu_metric = "icu_occupied";
  ingest->add_option("--raw", raw_path, "long-format raw series csv")->required();
  ingest->add_option("--population", pop_path, "area_id,population csv")->required();
  ingest->add_option("--start", start_s, "panel start date")->required();
  ingest->add_option("--end", end_s, "panel end date")->required();
  ingest->add_option("--study-start", study_s, "study start (week origin)")->required();
  ingest->add_option("--icu-metric", icu_metric)->capture_default_str();
  ingest->add_option("--out", out_path, "panel csv")->required();

  // fit ---------------------------------------------------------------------
  auto* fit_cmd = app.add_subcommand("fit", "maximum likelihood fit with convergence check");
  std::string panel_path, fit_path;
  bool intercept_only = false;
  fit_cmd->add_option("--panel", panel_path)->required();
  fit_cmd->add_option("--out", fit_path, "fit json")->required();
  fit_cmd->add_flag("--intercept-only", intercept_only, "drop the random slope");

  // ci ----------------------------------------------------------------------
  auto* ci_cmd = app.add_subcommand("ci", "double bootstrap t-percentile intervals");
  std::string ci_panel, ci_fit, ci_out;
  ci_cmd->add_option("--panel", ci_panel)->required();
  ci_cmd->add_option("--fit", ci_fit)->required();
  ci_cmd->add_option("--out", ci_out)->required();
  int opt_B1 = -1, opt_B2 = -1, opt_B = -1;
  double opt_alpha = -1.0;
  ci_cmd->add_option("--B1", opt_B1, "outer replicates");
  ci_cmd->add_option("--B2", opt_B2, "inner replicates");
  ci_cmd->add_option("--alpha", opt_alpha, "nominal level");

  // rmse --------------------------------------------------------------------
  auto* rmse_cmd = app.add_subcommand("rmse", "parametric bootstrap RMSE of the fitted rates");
  std::string rm_panel, rm_fit, rm_out;
  rmse_cmd->add_option("--panel", rm_panel)->required();
  rmse_cmd->add_option("--fit", rm_fit)->required();
  rmse_cmd->add_option("--out", rm_out)->required();
  rmse_cmd->add_option("--B", opt_B, "bootstrap replicates");

  // diagnose ----------------------------------------------------------------
  auto* diag_cmd = app.add_subcommand("diagnose", "residuals, qq data and cAIC");
  std::string dg_panel, dg_fit, dg_out, dg_res, dg_qq;
  diag_cmd->add_option("--panel", dg_panel)->required();
  diag_cmd->add_option("--fit", dg_fit)->required();
  diag_cmd->add_option("--out", dg_out, "diagnostics json")->required();
  diag_cmd->add_option("--residuals", dg_res, "optional residuals csv");
  diag_cmd->add_option("--qq", dg_qq, "optional qq csv");

  // forecast ----------------------------------------------------------------
  auto* fc_cmd = app.add_subcommand("forecast", "rolling-origin forward prediction");
  std::string fc_panel, fc_out, fc_fit_end, fc_eval_end, fc_h = "1:7";
  int refit_every = 1;
  fc_cmd->add_option("--panel", fc_panel)->required();
  fc_cmd->add_option("--fit-end", fc_fit_end, "last day of the first fitting window")->required();
  fc_cmd->add_option("--eval-end", fc_eval_end)->required();
  fc_cmd->add_option("--horizons", fc_h)->capture_default_str();
  fc_cmd->add_option("--refit-every", refit_every, "0 = never refit")->capture_default_str();
  fc_cmd->add_option("--out", fc_out)->required();

  // forecast-rmse -----------------------------------------------------------
  auto* fr_cmd = app.add_subcommand("forecast-rmse", "bootstrap RMSE of forward predictions");
  std::string fr_panel, fr_fit, fr_out, fr_origin, fr_h = "3,5,7";
  fr_cmd->add_option("--panel", fr_panel)->required();
  fr_cmd->add_option("--fit", fr_fit)->required();
  fr_cmd->add_option("--origin", fr_origin, "forecast origin date")->required();
  fr_cmd->add_option("--horizons", fr_h)->capture_default_str();
  int opt_Bf = -1;
  fr_cmd->add_option("--B", opt_Bf, "bootstrap replicates");
  fr_cmd->add_option("--out", fr_out)->required();

  // riskmap -----------------------------------------------------------------
  auto* rk_cmd = app.add_subcommand("riskmap", "choropleth-ready risk categories");
  std::string rk_panel, rk_date, rk_kind = "observed", rk_bounds, rk_thresh, rk_out;
  rk_cmd->add_option("--panel", rk_panel)->required();
  rk_cmd->add_option("--date", rk_date)->required();
  rk_cmd->add_option("--kind", rk_kind, "observed or predicted-h (h in 1..7)")->capture_default_str();
  rk_cmd->add_option("--boundaries", rk_bounds, "GeoJSON FeatureCollection")->required();
  rk_cmd->add_option("--thresholds", rk_thresh, "thresholds json (default profile otherwise)");
  rk_cmd->add_option("--out", rk_out)->required();

  // report ------------------------------------------------------------------
  auto* rp_cmd = app.add_subcommand("report", "fit + diagnostics + RMSE series in one pass");
  std::string rp_panel, rp_dir;
  rp_cmd->add_option("--panel", rp_panel)->required();
  rp_cmd->add_option("--out-dir", rp_dir)->required();
  rp_cmd->add_option("--B", opt_B, "bootstrap replicates");

  CLI11_PARSE(app, argc, argv);
  if (!config_path.empty()) apply_config_file(g, config_path);
  // explicit flags take precedence over the config file
  if (opt_B1 > 0) g.boot.B1 = opt_B1;
  if (opt_B2 > 0) g.boot.B2 = opt_B2;
  if (opt_B > 0) g.boot.B_rmse = opt_B;
  if (opt_Bf > 0) g.boot.B_forecast = opt_Bf;
  if (opt_alpha > 0) g.boot.alpha = opt_alpha;
  g.boot.seed = g.seed;
  g.boot.threads = g.threads;
  g.boot.validate();

  if (*ingest) {
    ParseReport rep;
    RawSeriesTable raw = load_raw(raw_path, LoadSchema{}, &rep);
    auto population = read_population(pop_path);
    RawSeriesTable rates = build_rates(raw, population);
    AssembleSpec spec;
    spec.icu_metric = icu_metric;
    PanelDataset panel = assemble_panel(rates, population, spec, parse_date(start_s),
                                        parse_date(end_s), parse_date(study_s));
    write_panel(panel, out_path);
    std::cout << "panel: " << panel.D() << " areas x " << panel.T << " days ("
              << panel.n() << " rows), " << rep.row_errors.size()
              << " rejected input rows\n";
    for (const auto& e : rep.row_errors) std::cout << "  " << e << "\n";
  }

  if (*fit_cmd) {
    PanelDataset panel = read_panel(panel_path);
    ModelSpec spec;
    spec.random_slope = !intercept_only;
    FitResult r = fit(spec, panel, g.optimizers, g.seed);
    save_fit(r, panel, fit_path);
    auto names = free_parameter_names(spec);
    auto values = free_parameter_values(spec, r.params);
    std::cout << "loglik " << format_double(r.loglik) << " (reference "
              << r.reference_optimizer << ")\n";
    for (size_t j = 0; j < names.size(); ++j)
      std::cout << names[j] << " " << format_double(values[j]) << " cv "
                << format_double(r.convergence_cv.at(names[j])) << "\n";
    for (const auto& w : r.warnings) std::cout << "warning: " << w << "\n";
  }

  if (*ci_cmd) {
    PanelDataset panel = read_panel(ci_panel);
    FitResult r = load_fit(panel, ci_fit);
    CiTable ci = double_bootstrap_t_ci(r, panel, g.boot);
    std::string out = "name,lower,estimate,upper\n";
    for (size_t j = 0; j < ci.names.size(); ++j)
      out += ci.names[j] + "," + format_double(ci.lower[j]) + "," +
             format_double(ci.estimate[j]) + "," + format_double(ci.upper[j]) + "\n";
    write_text(ci_out, out);
    std::cout << "outer replicates used " << ci.outer_used << ", failed "
              << ci.outer_failed << "\n";
  }

  if (*rmse_cmd) {
    PanelDataset panel = read_panel(rm_panel);
    FitResult r = load_fit(panel, rm_fit);
    RmseTable t = bootstrap_rmse_fit(r, panel, g.boot);
    std::string out = "area_id,date,rmse_rate,rel_rmse\n";
    for (int a = 0; a < panel.D(); ++a)
      for (int ti = 0; ti < panel.T; ++ti) {
        size_t i = panel.idx(a, ti);
        out += panel.areas[size_t(a)] + "," + format_date(panel.day(ti)) + "," +
               format_double(t.rmse[i]) + "," + format_double(t.rel_rmse[i]) + "\n";
      }
    write_text(rm_out, out);
    std::cout << "relative RMSE mean " << format_double(t.rel_summary.mean) << ", central"
              << " 75% [" << format_double(quantile_type7([&] {
                   auto v = t.rel_rmse;
                   std::sort(v.begin(), v.end());
                   return v;
                 }(), 0.125))
              << ", " << format_double(quantile_type7([&] {
                   auto v = t.rel_rmse;
                   std::sort(v.begin(), v.end());
                   return v;
                 }(), 0.875))
              << "]\n";
  }

  if (*diag_cmd) {
    PanelDataset panel = read_panel(dg_panel);
    FitResult r = load_fit(panel, dg_fit);
    DiagnosticsReport rep = diagnose(r, panel);
    ordered_json j;
    j["caic"] = rep.caic.caic;
    j["cond_loglik"] = rep.caic.cond_loglik;
    j["edf"] = rep.caic.edf;
    j["share_within_band"] = rep.share_within_band;
    write_text(dg_out, j.dump(2) + "\n");
    if (!dg_res.empty())
      emit_residuals_series(panel, predict_fitted(r, panel), rep.pearson, dg_res);
    if (!dg_qq.empty()) emit_qq_series(rep.qq, dg_qq);
    std::cout << "cAIC " << format_double(rep.caic.caic) << " (edf "
              << format_double(rep.caic.edf) << "), residual share in [-1.5, 1.5] "
              << format_double(rep.share_within_band) << "\n";
  }

  if (*fc_cmd) {
    PanelDataset panel = read_panel(fc_panel);
    auto horizons = parse_horizons(fc_h);
    auto ro = rolling_origin_run(panel, parse_date(fc_fit_end), parse_date(fc_eval_end),
                                 horizons, refit_every, g.seed, g.threads);
    std::string out = "area_id,origin,horizon,pred_rate_100k,actual_rate_100k,rmse_sim\n";
    for (const auto& rec : ro.records) {
      out += rec.area_id + "," + format_date(rec.origin) + "," +
             std::to_string(rec.horizon) + "," + format_double(rec.pred_rate_100k) + "," +
             (rec.actual_rate_100k ? format_double(*rec.actual_rate_100k) : "") + "," +
             (rec.rmse_sim ? format_double(*rec.rmse_sim) : "") + "\n";
    }
    write_text(fc_out, out);
    std::cout << ro.origins_total << " origins (" << ro.origins_failed << " failed)\n";
    for (size_t a = 0; a < ro.areas.size(); ++a) {
      std::cout << ro.areas[a] << " realized rmse:";
      for (size_t j = 0; j < ro.horizons.size(); ++j)
        std::cout << " h" << ro.horizons[j] << "=" << format_double(ro.rmse[a][j]);
      std::cout << "\n";
    }
  }

  if (*fr_cmd) {
    PanelDataset panel = read_panel(fr_panel);
    Date origin = parse_date(fr_origin);
    PanelDataset window = panel.slice(panel.start, origin);
    FitResult r = load_fit(window, fr_fit);
    auto horizons = parse_horizons(fr_h);
    ForecastRmse t = forecast_rmse_bootstrap(r, panel, origin, horizons, g.boot);
    std::string out = "area_id,horizon,rmse_sim\n";
    for (size_t a = 0; a < t.areas.size(); ++a)
      for (size_t j = 0; j < t.horizons.size(); ++j)
        out += t.areas[a] + "," + std::to_string(t.horizons[j]) + "," +
               format_double(t.rmse[a][j]) + "\n";
    write_text(fr_out, out);
    for (const auto& w : t.warnings) std::cout << "warning: " << w << "\n";
    std::cout << t.replicates_used << " replicates\n";
  }

  if (*rk_cmd) {
    PanelDataset panel = read_panel(rk_panel);
    RiskThresholds thresholds =
        rk_thresh.empty() ? g.thresholds : load_thresholds(rk_thresh);
    Date date = parse_date(rk_date);
    int t = days_between(panel.start, date);
    if (t < 0 || t >= panel.T)
      throw std::runtime_error("date " + rk_date + " outside the panel");

    std::vector<double> rates;
    if (rk_kind == "observed") {
      for (int a = 0; a < panel.D(); ++a) {
        size_t i = panel.idx(a, t);
        rates.push_back(1e5 * panel.y[i] / panel.offset[i]);
      }
    } else if (rk_kind.rfind("predicted-", 0) == 0) {
      int h = std::stoi(rk_kind.substr(10));
      Date origin = date - std::chrono::days(h);
      if (days_between(panel.start, origin) < 7)
        throw std::runtime_error("not enough history before " + rk_date);
      PanelDataset window = panel.slice(panel.start, origin);
      FitResult r = fit(ModelSpec{}, window, g.optimizers, g.seed);
      auto recs = predict_forward(r, window, origin, {h});
      rates.resize(size_t(panel.D()));
      for (const auto& rec : recs) {
        auto it = std::find(panel.areas.begin(), panel.areas.end(), rec.area_id);
        rates[size_t(it - panel.areas.begin())] = rec.pred_rate_100k;
      }
    } else {
      throw std::runtime_error("unknown riskmap kind: " + rk_kind);
    }
    RiskMapDocument doc = make_risk_document(date, rk_kind, panel.areas, rates, thresholds);
    emit_map(doc, rk_bounds, rk_out);
    for (const auto& e : doc.entries)
      std::cout << e.area_id << " " << format_double(e.value) << " " << e.level << "\n";
  }

  if (*rp_cmd) {
    std::filesystem::create_directories(rp_dir);
    PanelDataset panel = read_panel(rp_panel);
    FitResult r = fit(ModelSpec{}, panel, g.optimizers, g.seed);
    save_fit(r, panel, rp_dir + "/fit.json");
    DiagnosticsReport rep = diagnose(r, panel);
    RmseTable t = bootstrap_rmse_fit(r, panel, g.boot);
    FittedValues fv = predict_fitted(r, panel);
    std::vector<double> rmse_100k(t.rmse.size());
    for (size_t i = 0; i < t.rmse.size(); ++i) rmse_100k[i] = 1e5 * t.rmse[i];
    emit_fit_series(panel, fv, rmse_100k, rp_dir);
    emit_residuals_series(panel, fv, rep.pearson, rp_dir + "/residuals.csv");
    emit_qq_series(rep.qq, rp_dir + "/qq.csv");
    ordered_json j;
    j["loglik"] = r.loglik;
    j["caic"] = rep.caic.caic;
    j["edf"] = rep.caic.edf;
    j["share_within_band"] = rep.share_within_band;
    j["rel_rmse_mean"] = t.rel_summary.mean;
    write_text(rp_dir + "/summary.json", j.dump(2) + "\n");
    std::cout << "report written to " << rp_dir << "\n";
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
