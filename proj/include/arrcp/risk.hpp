#pragma once

#include <map>
#include <string>
#include <vector>

#include "arrcp/diagnostics.hpp"
#include "arrcp/forecast.hpp"

namespace arrcp {

// Ordered risk scale. cuts[i] is the lower bound of levels[i + 1]; the lowest
// level starts at 0. Intervals are half-open [lo, hi): a rate exactly at a cut
// belongs to the upper level.
struct RiskThresholds {
  std::vector<std::string> levels;  // lowest to highest
  std::vector<double> cuts;         // size levels.size() - 1, strictly increasing
  std::string provenance;

  void validate() const;  // throws on < 2 levels or non-increasing cuts
};

// Built-in five-level profile; the cut points are a configurable default, not
// authoritative guideline values.
RiskThresholds default_thresholds();

// JSON file {"levels": [...], "cuts": [...], "provenance": "..."}.
RiskThresholds load_thresholds(const std::string& path);
void save_thresholds(const RiskThresholds& t, const std::string& path);

// Returns the level index; throws on a negative rate.
int categorize(double rate_100k, const RiskThresholds& t);

struct RiskEntry {
  std::string area_id;
  double value = 0.0;  // rate per 100k
  int level_index = 0;
  std::string level;
};

struct RiskMapDocument {
  Date date{};
  std::string kind;  // "observed" or "predicted-h"
  std::vector<RiskEntry> entries;
};

RiskMapDocument make_risk_document(Date date, const std::string& kind,
                                   const std::vector<std::string>& areas,
                                   const std::vector<double>& rates_100k,
                                   const RiskThresholds& t);

struct RiskComparison {
  std::vector<std::string> areas;
  std::vector<int> delta;  // predicted level_index - observed level_index
  int exact_matches = 0;
  std::map<int, int> discrepancies;  // nonzero delta -> count
};

// Requires the same date and area set; throws naming any missing area.
RiskComparison compare_risk(const RiskMapDocument& observed,
                            const RiskMapDocument& predicted);

// Joins the document onto a GeoJSON FeatureCollection whose features carry an
// "area_id" property; output features get {area_id, value, level, level_index,
// date, kind} properties. Deterministic byte-for-byte; throws on an empty
// document or an area without exactly one boundary feature.
void emit_map(const RiskMapDocument& doc, const std::string& boundaries_path,
              const std::string& out_path);

// Plot-ready delimited files, one per area, columns
// date,observed_rate,predicted_rate,band_lo,band_hi,ep (bands are value +/- RMSE,
// per-100k scale). Paths are dir/<prefix>_<area>.csv.
void emit_fit_series(const PanelDataset& data, const FittedValues& fv,
                     const std::vector<double>& rmse_100k, const std::string& dir,
                     const std::string& prefix = "fit");

// One horizon of a rolling-origin record set; rmse_100k maps area -> band
// half-width and must cover every area.
void emit_forecast_series(const PanelDataset& data,
                          const std::vector<ForecastRecord>& records, int horizon,
                          const std::map<std::string, double>& rmse_100k,
                          const std::string& dir, const std::string& prefix = "forecast");

// date,area_id,fitted_rate,pearson columns in one file.
void emit_residuals_series(const PanelDataset& data, const FittedValues& fv,
                           const std::vector<double>& pearson, const std::string& path);

// kind,theoretical,sample rows for both random-effect blocks.
void emit_qq_series(const QqData& qq, const std::string& path);

}  // namespace arrcp
