#include "arrcp/risk.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "arrcp/csv.hpp"

namespace arrcp {

using ordered_json = nlohmann::ordered_json;

void RiskThresholds::validate() const {
  if (levels.size() < 2) throw std::invalid_argument("risk scale needs at least 2 levels");
  if (cuts.size() != levels.size() - 1)
    throw std::invalid_argument("risk scale needs exactly one cut per level boundary");
  for (size_t i = 0; i < cuts.size(); ++i) {
    if (!(cuts[i] > 0) || !std::isfinite(cuts[i]))
      throw std::invalid_argument("risk cut points must be positive and finite");
    if (i > 0 && !(cuts[i] > cuts[i - 1]))
      throw std::invalid_argument("risk cut points must be strictly increasing");
  }
  for (const auto& l : levels)
    if (l.empty()) throw std::invalid_argument("empty risk level name");
}

RiskThresholds default_thresholds() {
  RiskThresholds t;
  t.levels = {"controlled", "low", "medium", "high", "very-high"};
  t.cuts = {2.0, 5.0, 10.0, 15.0};
  t.provenance = "default profile (ICU occupancy per 100k); override per guideline in use";
  t.validate();
  return t;
}

RiskThresholds load_thresholds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open thresholds file " + path);
  ordered_json j = ordered_json::parse(in);
  RiskThresholds t;
  t.levels = j.at("levels").get<std::vector<std::string>>();
  t.cuts = j.at("cuts").get<std::vector<double>>();
  t.provenance = j.value("provenance", std::string{});
  t.validate();
  return t;
}

void save_thresholds(const RiskThresholds& t, const std::string& path) {
  t.validate();
  ordered_json j;
  j["levels"] = t.levels;
  j["cuts"] = t.cuts;
  j["provenance"] = t.provenance;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write thresholds file " + path);
  out << j.dump(2) << '\n';
}

int categorize(double rate_100k, const RiskThresholds& t) {
  t.validate();
  if (!(rate_100k >= 0.0))
    throw std::invalid_argument("rate must be nonnegative, got " +
                                format_double(rate_100k));
  // level = highest level whose lower cut <= rate; boundary goes up.
  int level = 0;
  for (size_t i = 0; i < t.cuts.size(); ++i)
    if (rate_100k >= t.cuts[i]) level = int(i) + 1;
  return level;
}

RiskMapDocument make_risk_document(Date date, const std::string& kind,
                                   const std::vector<std::string>& areas,
                                   const std::vector<double>& rates_100k,
                                   const RiskThresholds& t) {
  if (areas.size() != rates_100k.size())
    throw std::invalid_argument("areas and rates differ in length");
  RiskMapDocument doc;
  doc.date = date;
  doc.kind = kind;
  for (size_t a = 0; a < areas.size(); ++a) {
    RiskEntry e;
    e.area_id = areas[a];
    e.value = rates_100k[a];
    e.level_index = categorize(rates_100k[a], t);
    e.level = t.levels[size_t(e.level_index)];
    doc.entries.push_back(std::move(e));
  }
  return doc;
}

RiskComparison compare_risk(const RiskMapDocument& observed,
                            const RiskMapDocument& predicted) {
  if (observed.date != predicted.date)
    throw std::invalid_argument("risk documents are for different dates");
  std::map<std::string, const RiskEntry*> pred;
  for (const auto& e : predicted.entries) pred[e.area_id] = &e;
  if (pred.size() != predicted.entries.size())
    throw std::invalid_argument("duplicate area in predicted document");
  if (observed.entries.size() != predicted.entries.size())
    throw std::invalid_argument("risk documents cover different area sets");

  RiskComparison out;
  for (const auto& e : observed.entries) {
    auto it = pred.find(e.area_id);
    if (it == pred.end())
      throw std::invalid_argument("area " + e.area_id + " missing from predicted document");
    int d = it->second->level_index - e.level_index;
    out.areas.push_back(e.area_id);
    out.delta.push_back(d);
    if (d == 0)
      ++out.exact_matches;
    else
      ++out.discrepancies[d];
  }
  return out;
}

void emit_map(const RiskMapDocument& doc, const std::string& boundaries_path,
              const std::string& out_path) {
  if (doc.entries.empty()) throw std::invalid_argument("risk document has no areas");
  std::ifstream in(boundaries_path);
  if (!in) throw std::runtime_error("cannot open boundary file " + boundaries_path);
  ordered_json bounds = ordered_json::parse(in);
  if (bounds.value("type", "") != "FeatureCollection" || !bounds.contains("features"))
    throw std::runtime_error(boundaries_path + " is not a FeatureCollection");

  std::map<std::string, const ordered_json*> by_area;
  for (const auto& f : bounds["features"]) {
    if (!f.contains("properties") || !f["properties"].contains("area_id")) continue;
    std::string id = f["properties"]["area_id"].get<std::string>();
    if (by_area.count(id))
      throw std::runtime_error("boundary file has duplicate feature for area " + id);
    by_area[id] = &f;
  }

  ordered_json out;
  out["type"] = "FeatureCollection";
  out["features"] = ordered_json::array();
  for (const auto& e : doc.entries) {
    auto it = by_area.find(e.area_id);
    if (it == by_area.end())
      throw std::runtime_error("area " + e.area_id + " has no boundary feature");
    ordered_json f;
    f["type"] = "Feature";
    f["properties"] = {{"area_id", e.area_id},
                       {"value", e.value},
                       {"level", e.level},
                       {"level_index", e.level_index},
                       {"date", format_date(doc.date)},
                       {"kind", doc.kind}};
    f["geometry"] = (*it->second).value("geometry", ordered_json());
    out["features"].push_back(std::move(f));
  }
  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot write " + out_path);
  os << out.dump(2) << '\n';
}

namespace {

std::ofstream open_series(const std::string& dir, const std::string& prefix,
                          const std::string& area) {
  std::string path = dir + "/" + prefix + "_" + area + ".csv";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "date,observed_rate,predicted_rate,band_lo,band_hi,ep\n";
  return out;
}

}  // namespace

void emit_fit_series(const PanelDataset& data, const FittedValues& fv,
                     const std::vector<double>& rmse_100k, const std::string& dir,
                     const std::string& prefix) {
  if (fv.rate_100k.size() != data.n())
    throw std::invalid_argument("fitted values do not match the panel");
  if (rmse_100k.size() != data.n())
    throw std::invalid_argument("fit series needs one RMSE per observation");
  for (int a = 0; a < data.D(); ++a) {
    std::ofstream out = open_series(dir, prefix, data.areas[size_t(a)]);
    for (int t = 0; t < data.T; ++t) {
      size_t i = data.idx(a, t);
      double obs = 1e5 * data.y[i] / data.offset[i];
      double pred = fv.rate_100k[i];
      out << format_date(data.day(t)) << ',' << format_double(obs) << ','
          << format_double(pred) << ',' << format_double(pred - rmse_100k[i]) << ','
          << format_double(pred + rmse_100k[i]) << ',' << ep_name(data.ep[i]) << '\n';
    }
  }
}

void emit_forecast_series(const PanelDataset& data,
                          const std::vector<ForecastRecord>& records, int horizon,
                          const std::map<std::string, double>& rmse_100k,
                          const std::string& dir, const std::string& prefix) {
  for (const auto& area : data.areas)
    if (!rmse_100k.count(area))
      throw std::invalid_argument("no forecast RMSE for area " + area);

  for (int a = 0; a < data.D(); ++a) {
    const std::string& area = data.areas[size_t(a)];
    std::ofstream out = open_series(dir, prefix, area);
    double band = rmse_100k.at(area);
    for (const auto& rec : records) {
      if (rec.horizon != horizon || rec.area_id != area) continue;
      Date target = rec.origin + std::chrono::days(rec.horizon);
      std::string obs = rec.actual_rate_100k ? format_double(*rec.actual_rate_100k) : "";
      out << format_date(target) << ',' << obs << ',' << format_double(rec.pred_rate_100k)
          << ',' << format_double(rec.pred_rate_100k - band) << ','
          << format_double(rec.pred_rate_100k + band) << ','
          << ep_name(epidemic_period(target)) << '\n';
    }
  }
}

void emit_residuals_series(const PanelDataset& data, const FittedValues& fv,
                           const std::vector<double>& pearson, const std::string& path) {
  if (pearson.size() != data.n() || fv.rate_100k.size() != data.n())
    throw std::invalid_argument("residuals do not match the panel");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "date,area_id,fitted_rate,pearson\n";
  for (int a = 0; a < data.D(); ++a)
    for (int t = 0; t < data.T; ++t) {
      size_t i = data.idx(a, t);
      out << format_date(data.day(t)) << ',' << data.areas[size_t(a)] << ','
          << format_double(fv.rate_100k[i]) << ',' << format_double(pearson[i]) << '\n';
    }
}

void emit_qq_series(const QqData& qq, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "kind,theoretical,sample\n";
  for (const auto& [th, s] : qq.intercept)
    out << "intercept," << format_double(th) << ',' << format_double(s) << '\n';
  for (const auto& [th, s] : qq.slope)
    out << "slope," << format_double(th) << ',' << format_double(s) << '\n';
}

}  // namespace arrcp
