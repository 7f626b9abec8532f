#include "arrcp/dates.hpp"

#include <cstdio>
#include <cstring>

namespace arrcp {

Date parse_date(const std::string& s) {
  int y = 0, m = 0, d = 0;
  if (std::sscanf(s.c_str(), "%d-%d-%d", &y, &m, &d) != 3)
    throw std::invalid_argument("bad date: '" + s + "' (expected YYYY-MM-DD)");
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(m)},
                                  std::chrono::day{unsigned(d)}};
  if (!ymd.ok()) throw std::invalid_argument("invalid calendar date: '" + s + "'");
  return std::chrono::sys_days{ymd};
}

std::string format_date(Date d) {
  std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", int(ymd.year()), unsigned(ymd.month()),
                unsigned(ymd.day()));
  return buf;
}

int week_index(Date date, Date study_start) {
  int t = days_between(study_start, date);
  if (t < 0)
    throw std::invalid_argument("date " + format_date(date) + " precedes study start " +
                                format_date(study_start));
  return t / 7;
}

EpidemicPeriod epidemic_period(Date date) {
  static const Date ep2_lo = parse_date("2020-06-22");
  static const Date ep3_lo = parse_date("2020-12-07");
  static const Date ep4_lo = parse_date("2021-03-15");
  static const Date ep5_lo = parse_date("2021-06-20");
  static const Date ep6_lo = parse_date("2021-10-14");
  static const Date ep6_hi = parse_date("2022-03-27");
  if (date < ep2_lo || date > ep6_hi)
    throw std::out_of_range("date " + format_date(date) + " outside epidemic periods");
  if (date < ep3_lo) return EpidemicPeriod::EP2;
  if (date < ep4_lo) return EpidemicPeriod::EP3;
  if (date < ep5_lo) return EpidemicPeriod::EP4;
  if (date < ep6_lo) return EpidemicPeriod::EP5;
  return EpidemicPeriod::EP6;
}

const char* ep_name(EpidemicPeriod ep) {
  switch (ep) {
    case EpidemicPeriod::EP2: return "EP2";
    case EpidemicPeriod::EP3: return "EP3";
    case EpidemicPeriod::EP4: return "EP4";
    case EpidemicPeriod::EP5: return "EP5";
    case EpidemicPeriod::EP6: return "EP6";
  }
  throw std::logic_error("unreachable");
}

EpidemicPeriod ep_from_name(const std::string& name) {
  for (auto ep : {EpidemicPeriod::EP2, EpidemicPeriod::EP3, EpidemicPeriod::EP4,
                  EpidemicPeriod::EP5, EpidemicPeriod::EP6})
    if (name == ep_name(ep)) return ep;
  throw std::invalid_argument("unknown epidemic period label: " + name);
}

}  // namespace arrcp
