#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "regopt/coverage.hpp"

namespace regopt {

// Grouped-bar comparison of optimization methods across named scenarios,
// one series triple per method. Matrices are [method][scenario].
struct ComparisonPlotData {
    std::vector<std::string> scenarios;
    std::vector<std::string> methods;
    std::vector<std::vector<double>> regain;
    std::vector<std::vector<double>> compression_runs;
    std::vector<std::vector<double>> compression_cpu;
};

void validate_plot_data(const ComparisonPlotData& data);

ComparisonPlotData load_plot_data(const std::filesystem::path& path);
ComparisonPlotData plot_data_from_string(std::string_view text,
                                         std::string_view origin = "<memory>");

// Writes <metric>.csv and <metric>.svg for regain, compression_runs and
// compression_cpu into out_dir. Byte-deterministic for identical input.
std::vector<std::filesystem::path> emit_comparison(const ComparisonPlotData& data,
                                                   const std::filesystem::path& out_dir);

struct BinComparisonRow {
    std::string id;
    std::string group;
    std::uint32_t weight = 1;
    bool original_satisfied = false;
    bool optimized_satisfied = false;
};

// Per-bin satisfaction side-by-side for two regressions over the same space.
std::vector<BinComparisonRow> bin_comparison(const Regression& original,
                                             const Regression& optimized);
void write_bin_comparison_csv(const std::vector<BinComparisonRow>& rows, std::ostream& out);

} // namespace regopt
