#include "regopt/report.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "regopt/errors.hpp"
#include "regopt/format.hpp"
#include "regopt/io.hpp"

namespace regopt {

using nlohmann::json;

void validate_plot_data(const ComparisonPlotData& data) {
    if (data.scenarios.empty()) throw ValidationError("plot data has no scenarios");
    if (data.methods.empty()) throw ValidationError("plot data has no methods");
    const auto check = [&](const std::vector<std::vector<double>>& m, const char* name) {
        if (m.size() != data.methods.size())
            throw ValidationError(std::string("series '") + name +
                                  "' does not match the method count");
        for (const auto& row : m)
            if (row.size() != data.scenarios.size())
                throw ValidationError(std::string("series '") + name +
                                      "' does not match the scenario count");
    };
    check(data.regain, "regain");
    check(data.compression_runs, "compression_runs");
    check(data.compression_cpu, "compression_cpu");
}

ComparisonPlotData plot_data_from_string(std::string_view text, std::string_view origin) {
    const std::string context(origin);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(context + ": " + e.what());
    }

    ComparisonPlotData data;
    try {
        data.scenarios = doc.at("scenarios").get<std::vector<std::string>>();
        for (const json& series : doc.at("series")) {
            data.methods.push_back(series.at("method").get<std::string>());
            data.regain.push_back(series.at("regain").get<std::vector<double>>());
            data.compression_runs.push_back(
                series.at("compression_runs").get<std::vector<double>>());
            data.compression_cpu.push_back(
                series.at("compression_cpu").get<std::vector<double>>());
        }
    } catch (const json::exception& e) {
        throw ParseError(context + ": " + e.what());
    }
    validate_plot_data(data);
    return data;
}

ComparisonPlotData load_plot_data(const std::filesystem::path& path) {
    return plot_data_from_string(read_file(path), path.string());
}

namespace {

constexpr const char* kPalette[] = {"#4472c4", "#ed7d31", "#a5a5a5", "#ffc000",
                                    "#5b9bd5", "#70ad47"};

std::string metric_csv(const ComparisonPlotData& data,
                       const std::vector<std::vector<double>>& values) {
    std::string out = "scenario,method,value\n";
    for (std::size_t s = 0; s < data.scenarios.size(); ++s)
        for (std::size_t m = 0; m < data.methods.size(); ++m)
            out += data.scenarios[s] + "," + data.methods[m] + "," +
                   format_double(values[m][s]) + "\n";
    return out;
}

std::string metric_svg(const ComparisonPlotData& data,
                       const std::vector<std::vector<double>>& values,
                       const std::string& title) {
    const std::size_t n_scenarios = data.scenarios.size();
    const std::size_t n_methods = data.methods.size();

    const double bar_w = 26.0;
    const double group_gap = 34.0;
    const double group_w = bar_w * static_cast<double>(n_methods);
    const double margin_left = 64.0, margin_right = 24.0;
    const double margin_top = 40.0, margin_bottom = 64.0;
    const double plot_h = 240.0;
    const double plot_w = static_cast<double>(n_scenarios) * (group_w + group_gap) + group_gap;
    const double width = margin_left + plot_w + margin_right;
    const double height = margin_top + plot_h + margin_bottom;

    double max_value = 0.0;
    for (const auto& row : values)
        for (double v : row) max_value = std::max(max_value, v);
    if (max_value <= 0.0) max_value = 1.0;
    const double y_top = max_value * 1.1;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_double(width)
        << "\" height=\"" << format_double(height) << "\" viewBox=\"0 0 "
        << format_double(width) << ' ' << format_double(height) << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << format_double(width / 2.0)
        << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
        << title << "</text>\n";

    // Axes and horizontal gridlines at quarters of the y range.
    const double x0 = margin_left, y0 = margin_top + plot_h;
    svg << "<line x1=\"" << format_double(x0) << "\" y1=\"" << format_double(margin_top)
        << "\" x2=\"" << format_double(x0) << "\" y2=\"" << format_double(y0)
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << format_double(x0) << "\" y1=\"" << format_double(y0) << "\" x2=\""
        << format_double(x0 + plot_w) << "\" y2=\"" << format_double(y0)
        << "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double frac = static_cast<double>(tick) / 4.0;
        const double y = y0 - frac * plot_h;
        const double v = frac * y_top;
        if (tick > 0)
            svg << "<line x1=\"" << format_double(x0) << "\" y1=\"" << format_double(y)
                << "\" x2=\"" << format_double(x0 + plot_w) << "\" y2=\"" << format_double(y)
                << "\" stroke=\"#dddddd\"/>\n";
        svg << "<text x=\"" << format_double(x0 - 6.0) << "\" y=\"" << format_double(y + 4.0)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
            << format_double(v) << "</text>\n";
    }

    for (std::size_t s = 0; s < n_scenarios; ++s) {
        const double gx = x0 + group_gap + static_cast<double>(s) * (group_w + group_gap);
        for (std::size_t m = 0; m < n_methods; ++m) {
            const double v = values[m][s];
            const double h = std::max(0.0, v / y_top * plot_h);
            const double bx = gx + static_cast<double>(m) * bar_w;
            svg << "<rect x=\"" << format_double(bx) << "\" y=\"" << format_double(y0 - h)
                << "\" width=\"" << format_double(bar_w - 3.0) << "\" height=\""
                << format_double(h) << "\" fill=\""
                << kPalette[m % (sizeof(kPalette) / sizeof(kPalette[0]))] << "\"/>\n";
            svg << "<text x=\"" << format_double(bx + (bar_w - 3.0) / 2.0) << "\" y=\""
                << format_double(y0 - h - 4.0)
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"9\">"
                << format_double(v) << "</text>\n";
        }
        svg << "<text x=\"" << format_double(gx + group_w / 2.0) << "\" y=\""
            << format_double(y0 + 16.0)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << data.scenarios[s] << "</text>\n";
    }

    for (std::size_t m = 0; m < n_methods; ++m) {
        const double ly = height - margin_bottom + 36.0;
        const double lx = margin_left + static_cast<double>(m) * 120.0;
        svg << "<rect x=\"" << format_double(lx) << "\" y=\"" << format_double(ly - 9.0)
            << "\" width=\"10\" height=\"10\" fill=\""
            << kPalette[m % (sizeof(kPalette) / sizeof(kPalette[0]))] << "\"/>\n";
        svg << "<text x=\"" << format_double(lx + 14.0) << "\" y=\"" << format_double(ly)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << data.methods[m]
            << "</text>\n";
    }
    svg << "</svg>\n";
    return std::move(svg).str();
}

} // namespace

std::vector<std::filesystem::path> emit_comparison(const ComparisonPlotData& data,
                                                   const std::filesystem::path& out_dir) {
    validate_plot_data(data);
    std::filesystem::create_directories(out_dir);

    struct Metric {
        const char* name;
        const char* title;
        const std::vector<std::vector<double>>* values;
    };
    const Metric metrics[] = {
        {"regain", "Coverage regain (%)", &data.regain},
        {"compression_runs", "Compression factor in runs", &data.compression_runs},
        {"compression_cpu", "Compression factor in CPU runtime", &data.compression_cpu},
    };

    std::vector<std::filesystem::path> written;
    for (const Metric& metric : metrics) {
        const auto csv_path = out_dir / (std::string(metric.name) + ".csv");
        write_file(csv_path, metric_csv(data, *metric.values));
        written.push_back(csv_path);
        const auto svg_path = out_dir / (std::string(metric.name) + ".svg");
        write_file(svg_path, metric_svg(data, *metric.values, metric.title));
        written.push_back(svg_path);
    }
    return written;
}

std::vector<BinComparisonRow> bin_comparison(const Regression& original,
                                             const Regression& optimized) {
    if (!(original.space == optimized.space))
        throw ValidationError("regressions cover different coverage spaces");
    const auto original_hits = hit_set(original.runs, original.space);
    const auto optimized_hits = hit_set(optimized.runs, optimized.space);

    std::vector<BinComparisonRow> rows;
    rows.reserve(original.space.size());
    for (const CoverageBin& bin : original.space.bins()) {
        rows.push_back({bin.id, bin.group, bin.weight, original_hits.contains(bin.id),
                        optimized_hits.contains(bin.id)});
    }
    return rows;
}

void write_bin_comparison_csv(const std::vector<BinComparisonRow>& rows, std::ostream& out) {
    out << "bin,group,weight,original_satisfied,optimized_satisfied\n";
    for (const BinComparisonRow& row : rows)
        out << row.id << ',' << row.group << ',' << row.weight << ','
            << (row.original_satisfied ? 1 : 0) << ',' << (row.optimized_satisfied ? 1 : 0)
            << '\n';
}

} // namespace regopt
