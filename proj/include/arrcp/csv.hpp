#pragma once

#include <string>
#include <vector>

namespace arrcp {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path, char delim = ',');

// Doubles are written with %.17g so a write/read cycle is bit exact.
std::string format_double(double v);
double parse_double(const std::string& s, const std::string& context);

}  // namespace arrcp
