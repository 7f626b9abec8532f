#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "arrcp/dates.hpp"

namespace arrcp {

// ---------------------------------------------------------------------------
// Raw ingestion

// One contiguous daily series for a (metric, area) pair.
struct DailySeries {
  Date start{};
  std::vector<double> values;

  bool covers(Date d) const {
    int t = days_between(start, d);
    return t >= 0 && t < int(values.size());
  }
  double at(Date d) const;
  Date end() const { return start + std::chrono::days(int(values.size()) - 1); }
};

// metric -> area -> series; built from long-format delimited input.
struct RawSeriesTable {
  std::map<std::string, std::map<std::string, DailySeries>> series;

  const DailySeries& get(const std::string& metric, const std::string& area) const;
  bool has(const std::string& metric) const { return series.count(metric) > 0; }
  std::vector<std::string> areas_of(const std::string& metric) const;
};

struct LoadSchema {
  std::string area_col = "area_id";
  std::string date_col = "date";
  std::string metric_col = "metric";
  std::string value_col = "value";
  char delimiter = ',';
};

struct ParseReport {
  size_t rows_read = 0;
  size_t rows_kept = 0;
  std::vector<std::string> row_errors;  // non-numeric values etc.
};

// Throws on schema errors, duplicate (area,date,metric) triples and daily gaps.
RawSeriesTable load_raw(const std::string& path, const LoadSchema& schema,
                        ParseReport* report = nullptr);

// lagged(d) = input(d - lag); never fabricates values.
DailySeries lag_series(const DailySeries& input, int lag);

// Derived rate metrics in model units:
//   ward.rate     = beds_occupied / population * 1000
//   disch.rate14  = discharges14 / population * 1000
//   acute.rate7   = icu_admissions7 / inpatients7, base 1 (0 when denominator 0)
RawSeriesTable build_rates(const RawSeriesTable& raw,
                           const std::map<std::string, double>& population);

// ---------------------------------------------------------------------------
// Assembled panel

// Complete area x day grid in struct-of-arrays layout, index a*T + t.
// Covariate order is fixed: intercept, acute.rate7, disch.rate14L3, ward.rateL2.
struct PanelDataset {
  std::vector<std::string> areas;
  Date start{};        // first panel day
  Date week_origin{};  // study start; w and t are counted from here
  int T = 0;

  std::vector<double> y, offset, x1, x2, x3;
  std::vector<int> w;
  std::vector<EpidemicPeriod> ep;

  int D() const { return int(areas.size()); }
  size_t n() const { return size_t(D()) * size_t(T); }
  size_t idx(int a, int t) const { return size_t(a) * size_t(T) + size_t(t); }
  Date day(int t) const { return start + std::chrono::days(t); }
  int day_index(int t) const { return days_between(week_origin, day(t)); }

  // Inclusive window; week_origin is preserved so week indices stay global.
  PanelDataset slice(Date from, Date to) const;
  PanelDataset head_days(int n_days) const;  // first n_days

  void validate() const;  // throws on any invariant failure
};

struct AssembleSpec {
  int lag_ward = 2;    // ward.rateL2
  int lag_disch = 3;   // disch.rate14L3
  std::string icu_metric = "icu_occupied";
};

PanelDataset assemble_panel(const RawSeriesTable& raw,
                            const std::map<std::string, double>& population,
                            const AssembleSpec& spec, Date window_start, Date window_end,
                            Date study_start);

// Canonical panel file: area_id,date,t,w,ep,y,offset,x1,x2,x3 with %.17g numerics.
void write_panel(const PanelDataset& panel, const std::string& path);
PanelDataset read_panel(const std::string& path);

// ---------------------------------------------------------------------------
// Descriptive summaries (validation against published per-EP tables)

struct SummaryStats {
  double min = 0, q1 = 0, median = 0, mean = 0, q3 = 0, max = 0;
  size_t count = 0;
};

SummaryStats summarize(std::vector<double> values);  // type-7 quartiles

// Per-EP summaries of a panel column in display units.
std::map<std::string, SummaryStats> per_ep_summary(const PanelDataset& panel,
                                                   const std::string& column);

double quantile_type7(std::vector<double> sorted_ascending, double p);

}  // namespace arrcp
