#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace snn::csv {

/// printf("%.6g") rendering used for every float column in result files.
std::string sig6(double value);
/// Round-trip exact rendering ("%.17g").
std::string exact(double value);

std::vector<std::string> split_line(std::string_view line, char delim = ',');

double parse_double(const std::string& field);
unsigned long long parse_uint(const std::string& field);

}  // namespace snn::csv
