#include "snn/csv.hpp"

#include <cstdio>
#include <cstdlib>

#include "snn/error.hpp"

namespace snn::csv {

std::string sig6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

std::string exact(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::vector<std::string> split_line(std::string_view line, char delim) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& field) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (field.empty() || end != field.c_str() + field.size()) {
    throw FormatError("not a number: '" + field + "'");
  }
  return v;
}

unsigned long long parse_uint(const std::string& field) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(field.c_str(), &end, 10);
  if (field.empty() || field[0] == '-' || end != field.c_str() + field.size()) {
    throw FormatError("not an unsigned integer: '" + field + "'");
  }
  return v;
}

}  // namespace snn::csv
