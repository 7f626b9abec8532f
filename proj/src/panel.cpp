#include "arrcp/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "arrcp/csv.hpp"

namespace arrcp {

double DailySeries::at(Date d) const {
  int t = days_between(start, d);
  if (t < 0 || t >= int(values.size()))
    throw std::out_of_range("series has no value at " + format_date(d));
  return values[size_t(t)];
}

const DailySeries& RawSeriesTable::get(const std::string& metric,
                                       const std::string& area) const {
  auto mi = series.find(metric);
  if (mi == series.end()) throw std::runtime_error("metric not present: " + metric);
  auto ai = mi->second.find(area);
  if (ai == mi->second.end())
    throw std::runtime_error("metric " + metric + " has no series for area " + area);
  return ai->second;
}

std::vector<std::string> RawSeriesTable::areas_of(const std::string& metric) const {
  std::vector<std::string> out;
  auto mi = series.find(metric);
  if (mi == series.end()) return out;
  for (const auto& [area, s] : mi->second) out.push_back(area);
  return out;
}

RawSeriesTable load_raw(const std::string& path, const LoadSchema& schema,
                        ParseReport* report) {
  CsvTable csv = read_csv(path, schema.delimiter);
  int ca = csv.column(schema.area_col);
  int cd = csv.column(schema.date_col);
  int cm = csv.column(schema.metric_col);
  int cv = csv.column(schema.value_col);
  if (ca < 0 || cd < 0 || cm < 0 || cv < 0) {
    std::string missing;
    for (const auto& [name, col] : {std::pair{schema.area_col, ca}, {schema.date_col, cd},
                                    {schema.metric_col, cm}, {schema.value_col, cv}})
      if (col < 0) missing += (missing.empty() ? "" : ", ") + name;
    throw std::runtime_error("missing required column(s): " + missing + " in " + path);
  }

  // metric -> area -> date -> value
  std::map<std::string, std::map<std::string, std::map<Date, double>>> cells;
  ParseReport local;
  for (size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    ++local.rows_read;
    if (int(row.size()) <= std::max({ca, cd, cm, cv})) {
      local.row_errors.push_back("row " + std::to_string(r + 2) + ": too few fields");
      continue;
    }
    const std::string& area = row[size_t(ca)];
    const std::string& metric = row[size_t(cm)];
    Date date;
    double value;
    try {
      date = parse_date(row[size_t(cd)]);
      value = parse_double(row[size_t(cv)], "row " + std::to_string(r + 2));
    } catch (const std::exception& e) {
      local.row_errors.push_back(e.what());
      continue;
    }
    if (value < 0)
      throw std::runtime_error("negative value for (" + area + ", " +
                               format_date(date) + ", " + metric + ")");
    auto [it, inserted] = cells[metric][area].emplace(date, value);
    if (!inserted)
      throw std::runtime_error("duplicate row for (" + area + ", " + format_date(date) +
                               ", " + metric + ")");
    ++local.rows_kept;
  }

  RawSeriesTable out;
  for (auto& [metric, by_area] : cells) {
    for (auto& [area, by_date] : by_area) {
      DailySeries s;
      s.start = by_date.begin()->first;
      Date expect = s.start;
      for (const auto& [d, v] : by_date) {
        if (d != expect)
          throw std::runtime_error("gap in daily range for metric " + metric + ", area " +
                                   area + ": expected " + format_date(expect) + ", found " +
                                   format_date(d));
        s.values.push_back(v);
        expect = expect + std::chrono::days(1);
      }
      out.series[metric][area] = std::move(s);
    }
  }
  if (report) *report = std::move(local);
  return out;
}

DailySeries lag_series(const DailySeries& input, int lag) {
  if (lag < 0) throw std::invalid_argument("lag must be nonnegative");
  DailySeries out;
  out.start = input.start + std::chrono::days(lag);
  out.values = input.values;
  return out;
}

RawSeriesTable build_rates(const RawSeriesTable& raw,
                           const std::map<std::string, double>& population) {
  for (const auto& [area, pop] : population)
    if (!(pop > 0)) throw std::runtime_error("population must be positive for area " + area);

  auto per_capita = [&](const std::string& src, const std::string& dst, double scale,
                        RawSeriesTable& out) {
    auto it = raw.series.find(src);
    if (it == raw.series.end()) return;
    for (const auto& [area, s] : it->second) {
      auto pi = population.find(area);
      if (pi == population.end())
        throw std::runtime_error("no population for area " + area);
      DailySeries r = s;
      for (auto& v : r.values) {
        if (v < 0) throw std::runtime_error("negative input value in metric " + src);
        v = v / pi->second * scale;
      }
      out.series[dst][area] = std::move(r);
    }
  };

  RawSeriesTable out;
  per_capita("beds_occupied", "ward.rate", 1000.0, out);
  per_capita("discharges14", "disch.rate14", 1000.0, out);

  // acute.rate7 = weekly ICU admissions / weekly total inpatients (base 1)
  auto num = raw.series.find("icu_admissions7");
  auto den = raw.series.find("inpatients7");
  if (num != raw.series.end() && den != raw.series.end()) {
    for (const auto& [area, ns] : num->second) {
      const DailySeries& ds = den->second.at(area);
      if (ds.start != ns.start || ds.values.size() != ns.values.size())
        throw std::runtime_error("icu_admissions7/inpatients7 misaligned for area " + area);
      DailySeries r = ns;
      for (size_t i = 0; i < r.values.size(); ++i) {
        if (ns.values[i] < 0 || ds.values[i] < 0)
          throw std::runtime_error("negative input value in acute.rate7 sources");
        r.values[i] = ds.values[i] == 0 ? 0.0 : ns.values[i] / ds.values[i];
      }
      out.series["acute.rate7"][area] = std::move(r);
    }
  }
  // pass untouched metrics through
  for (const auto& [metric, by_area] : raw.series)
    if (!out.series.count(metric)) out.series[metric] = by_area;
  return out;
}

PanelDataset assemble_panel(const RawSeriesTable& raw,
                            const std::map<std::string, double>& population,
                            const AssembleSpec& spec, Date window_start, Date window_end,
                            Date study_start) {
  if (window_end < window_start) throw std::invalid_argument("empty assembly window");
  if (window_start < study_start)
    throw std::invalid_argument("window starts before study start");

  for (const char* m : {"acute.rate7", "disch.rate14", "ward.rate"})
    if (!raw.has(m)) throw std::runtime_error(std::string("required metric missing: ") + m);
  if (!raw.has(spec.icu_metric))
    throw std::runtime_error("required metric missing: " + spec.icu_metric);

  PanelDataset p;
  p.areas = raw.areas_of(spec.icu_metric);
  if (p.areas.empty()) throw std::runtime_error("no areas in " + spec.icu_metric);
  p.start = window_start;
  p.week_origin = study_start;
  p.T = days_between(window_start, window_end) + 1;
  size_t n = size_t(p.areas.size()) * size_t(p.T);
  p.y.resize(n);
  p.offset.resize(n);
  p.x1.resize(n);
  p.x2.resize(n);
  p.x3.resize(n);
  p.w.resize(n);
  p.ep.resize(n);

  for (int a = 0; a < p.D(); ++a) {
    const std::string& area = p.areas[a];
    auto pi = population.find(area);
    if (pi == population.end()) throw std::runtime_error("no population for area " + area);
    const DailySeries& icu = raw.get(spec.icu_metric, area);
    const DailySeries& acute = raw.get("acute.rate7", area);
    const DailySeries disch = lag_series(raw.get("disch.rate14", area), spec.lag_disch);
    const DailySeries ward = lag_series(raw.get("ward.rate", area), spec.lag_ward);
    for (int t = 0; t < p.T; ++t) {
      Date d = p.day(t);
      size_t i = p.idx(a, t);
      for (const auto& [name, s] : std::initializer_list<std::pair<const char*, const DailySeries*>>{
               {"icu_occupied", &icu}, {"acute.rate7", &acute},
               {"disch.rate14L3", &disch}, {"ward.rateL2", &ward}})
        if (!s->covers(d))
          throw std::runtime_error("metric " + std::string(name) + " missing at (" + area +
                                   ", " + format_date(d) + ")");
      double yv = icu.at(d);
      if (yv < 0 || yv != std::floor(yv))
        throw std::runtime_error("icu count not a nonnegative integer at (" + area + ", " +
                                 format_date(d) + ")");
      p.y[i] = yv;
      p.offset[i] = pi->second;
      p.x1[i] = acute.at(d);
      p.x2[i] = disch.at(d);
      p.x3[i] = ward.at(d);
      p.w[i] = week_index(d, study_start);
      p.ep[i] = epidemic_period(d);
    }
  }
  p.validate();
  return p;
}

void PanelDataset::validate() const {
  if (areas.empty() || T <= 0) throw std::runtime_error("panel is empty");
  std::set<std::string> uniq(areas.begin(), areas.end());
  if (uniq.size() != areas.size()) throw std::runtime_error("duplicate area_id in panel");
  if (y.size() != n() || offset.size() != n() || x1.size() != n() || x2.size() != n() ||
      x3.size() != n() || w.size() != n() || ep.size() != n())
    throw std::runtime_error("panel arrays are not D*T");
  for (int a = 0; a < D(); ++a)
    for (int t = 0; t < T; ++t) {
      size_t i = idx(a, t);
      auto fail = [&](const std::string& what) {
        throw std::runtime_error("panel invariant violated (" + areas[size_t(a)] + ", " +
                                 format_date(day(t)) + "): " + what);
      };
      if (!(offset[i] > 0)) fail("offset must be positive");
      if (y[i] < 0 || y[i] != std::floor(y[i])) fail("y must be a nonnegative integer");
      if (w[i] != day_index(t) / 7) fail("week index mismatch");
      if (!std::isfinite(x1[i]) || !std::isfinite(x2[i]) || !std::isfinite(x3[i]))
        fail("non-finite covariate");
    }
}

PanelDataset PanelDataset::slice(Date from, Date to) const {
  int t0 = days_between(start, from);
  int t1 = days_between(start, to);
  if (t0 < 0 || t1 >= T || t1 < t0) throw std::out_of_range("slice window outside panel");
  PanelDataset out;
  out.areas = areas;
  out.start = from;
  out.week_origin = week_origin;
  out.T = t1 - t0 + 1;
  size_t m = out.n();
  out.y.reserve(m);
  for (int a = 0; a < D(); ++a)
    for (int t = t0; t <= t1; ++t) {
      size_t i = idx(a, t);
      out.y.push_back(y[i]);
      out.offset.push_back(offset[i]);
      out.x1.push_back(x1[i]);
      out.x2.push_back(x2[i]);
      out.x3.push_back(x3[i]);
      out.w.push_back(w[i]);
      out.ep.push_back(ep[i]);
    }
  return out;
}

PanelDataset PanelDataset::head_days(int n_days) const {
  return slice(start, start + std::chrono::days(n_days - 1));
}

void write_panel(const PanelDataset& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "area_id,date,t,w,ep,y,offset,x1,x2,x3\n";
  for (int a = 0; a < panel.D(); ++a)
    for (int t = 0; t < panel.T; ++t) {
      size_t i = panel.idx(a, t);
      out << panel.areas[size_t(a)] << ',' << format_date(panel.day(t)) << ','
          << panel.day_index(t) << ',' << panel.w[i] << ',' << ep_name(panel.ep[i]) << ','
          << (long long)panel.y[i] << ',' << format_double(panel.offset[i]) << ','
          << format_double(panel.x1[i]) << ',' << format_double(panel.x2[i]) << ','
          << format_double(panel.x3[i]) << '\n';
    }
  if (!out) throw std::runtime_error("write failed: " + path);
}

PanelDataset read_panel(const std::string& path) {
  CsvTable csv = read_csv(path);
  const char* cols[] = {"area_id", "date", "t", "w", "ep", "y", "offset", "x1", "x2", "x3"};
  int ci[10];
  for (int k = 0; k < 10; ++k) {
    ci[k] = csv.column(cols[k]);
    if (ci[k] < 0)
      throw std::runtime_error("panel file missing column " + std::string(cols[k]));
  }
  if (csv.rows.empty()) throw std::runtime_error("panel file has no rows: " + path);

  // rows are grouped by area then day; recover dimensions from the first block
  std::vector<std::string> areas;
  std::map<std::string, int> area_pos;
  for (const auto& row : csv.rows) {
    const std::string& a = row[size_t(ci[0])];
    if (!area_pos.count(a)) {
      area_pos[a] = int(areas.size());
      areas.push_back(a);
    }
  }
  size_t T = csv.rows.size() / areas.size();
  if (T * areas.size() != csv.rows.size())
    throw std::runtime_error("panel row count is not D*T");

  PanelDataset p;
  p.areas = areas;
  p.T = int(T);
  p.start = parse_date(csv.rows.front()[size_t(ci[1])]);
  int t0 = int(parse_double(csv.rows.front()[size_t(ci[2])], "t"));
  p.week_origin = p.start - std::chrono::days(t0);
  size_t n = p.n();
  p.y.resize(n);
  p.offset.resize(n);
  p.x1.resize(n);
  p.x2.resize(n);
  p.x3.resize(n);
  p.w.resize(n);
  p.ep.resize(n);

  std::vector<bool> seen(n, false);
  for (const auto& row : csv.rows) {
    int a = area_pos.at(row[size_t(ci[0])]);
    Date d = parse_date(row[size_t(ci[1])]);
    int t = days_between(p.start, d);
    if (t < 0 || t >= p.T)
      throw std::runtime_error("panel day outside inferred range: " + format_date(d));
    size_t i = p.idx(a, t);
    if (seen[i])
      throw std::runtime_error("duplicate panel row (" + row[size_t(ci[0])] + ", " +
                               format_date(d) + ")");
    seen[i] = true;
    p.y[i] = parse_double(row[size_t(ci[5])], "y");
    p.offset[i] = parse_double(row[size_t(ci[6])], "offset");
    p.x1[i] = parse_double(row[size_t(ci[7])], "x1");
    p.x2[i] = parse_double(row[size_t(ci[8])], "x2");
    p.x3[i] = parse_double(row[size_t(ci[9])], "x3");
    p.w[i] = int(parse_double(row[size_t(ci[3])], "w"));
    p.ep[i] = ep_from_name(row[size_t(ci[4])]);
  }
  for (size_t i = 0; i < n; ++i)
    if (!seen[i]) throw std::runtime_error("panel grid incomplete");
  p.validate();
  return p;
}

double quantile_type7(std::vector<double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  if (p <= 0) return sorted.front();
  if (p >= 1) return sorted.back();
  double h = (double(sorted.size()) - 1.0) * p;
  size_t lo = size_t(std::floor(h));
  double frac = h - double(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

SummaryStats summarize(std::vector<double> values) {
  SummaryStats s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.count = values.size();
  s.min = values.front();
  s.max = values.back();
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / double(values.size());
  s.q1 = quantile_type7(values, 0.25);
  s.median = quantile_type7(values, 0.5);
  s.q3 = quantile_type7(values, 0.75);
  return s;
}

std::map<std::string, SummaryStats> per_ep_summary(const PanelDataset& panel,
                                                   const std::string& column) {
  const std::vector<double>* col = nullptr;
  std::vector<double> derived;
  if (column == "x1") col = &panel.x1;
  else if (column == "x2") col = &panel.x2;
  else if (column == "x3") col = &panel.x3;
  else if (column == "y") col = &panel.y;
  else if (column == "icu_rate_100k") {
    derived.resize(panel.n());
    for (size_t i = 0; i < panel.n(); ++i)
      derived[i] = 100000.0 * panel.y[i] / panel.offset[i];
    col = &derived;
  } else {
    throw std::invalid_argument("unknown panel column: " + column);
  }
  std::map<std::string, std::vector<double>> by_ep;
  for (size_t i = 0; i < panel.n(); ++i) by_ep[ep_name(panel.ep[i])].push_back((*col)[i]);
  std::map<std::string, SummaryStats> out;
  for (auto& [ep, vals] : by_ep) out[ep] = summarize(std::move(vals));
  return out;
}

}  // namespace arrcp
