#pragma once

#include <string>

namespace aeromap::tools {

/// Writes CSV tables and SVG line charts for a run directory (report.json plus
/// the per-worker event logs) into out_dir. Returns the number of charts.
int plot_report(const std::string& run_dir, const std::string& out_dir);

}  // namespace aeromap::tools
