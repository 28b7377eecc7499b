#pragma once

#include <optional>
#include <string>
#include <vector>

namespace vf::csv {

// Locale-independent double formatting. `shortest` round-trips bit-exactly;
// `sig17` pins 17 significant digits for the feature-matrix files.
std::string shortest(double v);
std::string sig17(double v);

// Strict full-string parse; "nan" (any case) yields quiet NaN.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

std::vector<std::string> split(const std::string& line, char sep = ',');
std::string join(const std::vector<std::string>& fields, char sep = ',');

// Whole-file helpers. read_lines drops a single trailing empty line.
std::vector<std::string> read_lines(const std::string& path);
void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

} // namespace vf::csv
