#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace vitoria {

/// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);

/// Reads records, skipping blank lines; `line_numbers` receives the 1-based source line of each.
std::vector<std::vector<std::string>> read_csv(std::istream& in, std::vector<std::size_t>* line_numbers = nullptr);

std::string csv_escape(std::string_view field);

}  // namespace vitoria
