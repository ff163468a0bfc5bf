#pragma once

#include "selbias/core.hpp"
#include "selbias/harness.hpp"

#include <string>

namespace selbias {

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Writes `content` to a temporary sibling and renames it over `path`.
void write_atomic(const std::string& path, const std::string& content);

std::string report_csv(const RunReport& report);
void emit_csv(const RunReport& report, const std::string& path);
/// Parses the rows of a report CSV; oracle and hash are not stored there.
RunReport parse_report_csv(const std::string& text);
RunReport read_report_csv(const std::string& path);

std::string boxplot_svg(const RunReport& report);
void emit_boxplot_svg(const RunReport& report, const std::string& path);

std::string summary_csv(const std::vector<MethodSummary>& summary);

/// Columns x,t,y0,y1,y,selected.
std::string dataset_csv(const Dataset& data);
void write_dataset_csv(const Dataset& data, const std::string& path);
Dataset parse_dataset_csv(const std::string& text, std::uint64_t seed = 0);
Dataset read_dataset_csv(const std::string& path, std::uint64_t seed = 0);

}  // namespace selbias
