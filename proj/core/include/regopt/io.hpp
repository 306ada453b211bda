#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "regopt/coverage.hpp"
#include "regopt/generate.hpp"
#include "regopt/learn.hpp"
#include "regopt/synthdut.hpp"

namespace regopt {

inline constexpr int kFormatVersion = 1;

// Regression archive: UTF-8 JSON lines. Line 1 is a header object with
// format_version, space and declarations; every following line is one run.
// Serialization is canonical (sorted keys, shortest round-trip decimals,
// newline-terminated records), so equal regressions produce equal bytes.
Regression load_regression(const std::filesystem::path& path);
Regression regression_from_string(std::string_view text,
                                  std::string_view origin = "<memory>");
void save_regression(const Regression& regression, const std::filesystem::path& path);
std::string regression_to_string(const Regression& regression);

// Concatenates runs in input order. Inputs must agree on the coverage space
// and declarations; mismatches report the differing bins / control points.
Regression merge_regressions(std::span<const Regression> regressions);

// Model set: one canonical JSON document.
ModelSet load_model_set(const std::filesystem::path& path);
ModelSet model_set_from_string(std::string_view text, std::string_view origin = "<memory>");
void save_model_set(const ModelSet& models, const std::filesystem::path& path);
std::string model_set_to_string(const ModelSet& models);

// Optimized regression plan: one canonical JSON document.
OptimizedRegression load_plan(const std::filesystem::path& path);
OptimizedRegression plan_from_string(std::string_view text,
                                     std::string_view origin = "<memory>");
void save_plan(const OptimizedRegression& plan, const std::filesystem::path& path);
std::string plan_to_string(const OptimizedRegression& plan);

// Synthetic testbench spec: one canonical JSON document.
DutSpec load_dut_spec(const std::filesystem::path& path);
DutSpec dut_spec_from_string(std::string_view text, std::string_view origin = "<memory>");
void save_dut_spec(const DutSpec& dut, const std::filesystem::path& path);
std::string dut_spec_to_string(const DutSpec& dut);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);
std::string file_digest(const std::filesystem::path& path);

} // namespace regopt
