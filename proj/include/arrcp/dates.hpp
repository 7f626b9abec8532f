#pragma once

#include <chrono>
#include <stdexcept>
#include <string>

namespace arrcp {

// Calendar day, stored as days since the civil epoch.
using Date = std::chrono::sys_days;

Date parse_date(const std::string& s);          // "YYYY-MM-DD"
std::string format_date(Date d);

inline int days_between(Date from, Date to) {
  return static_cast<int>((to - from).count());
}

// Consecutive 7-day blocks counted from the study start.
int week_index(Date date, Date study_start);

// Officially delimited epidemic periods EP2..EP6.
enum class EpidemicPeriod { EP2, EP3, EP4, EP5, EP6 };

EpidemicPeriod epidemic_period(Date date);
const char* ep_name(EpidemicPeriod ep);
EpidemicPeriod ep_from_name(const std::string& name);

}  // namespace arrcp
