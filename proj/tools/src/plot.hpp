#pragma once

#include "jcl/report.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace jcl::app {

// Reads <dir>/reports/*.json and writes one SVG per plottable series to
// <dir>/plots/. Throws Error(MissingReport) when there is nothing to read.
std::vector<std::filesystem::path> plot_reports(const std::filesystem::path& dir);

std::string line_svg(const std::string& title, const Series& s, const std::string& xlabel, const std::string& ylabel);
// Log-log axes and a fitted slope annotation.
std::string loglog_svg(const std::string& title, const Series& s);
// Node values on the report's grid; series x holds node indices.
std::string heatmap_svg(const std::string& title, const Series& s, const GridMeta& grid);

}  // namespace jcl::app
