#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace optlaw {

// Renders loaded report documents (fit_result, shared_fit_result, loo_report,
// correlation_report, extrapolation_report payloads with their type tags) as
// aligned text tables, with "value +- std" cells where LOO data exists.
struct LoadedDoc {
    std::string type;
    std::string source;  // file path, used as the row label
    nlohmann::json payload;
};

std::string render_report(const std::vector<LoadedDoc>& docs);

// "value +- std" cell: 0 decimals when |value| >= 100, else 2 decimals.
std::string format_pm(double value, double std);
std::string format_value(double value);

// CSV plot data. For loo_report docs: (alpha_j, A_j) and (beta_j, B_j)
// scatter pairs plus the iso-curve A = const * N_c^alpha. For a pair of
// extrapolation_report docs: naive/shared bar pairs per optimizer.
// Returns (relative filename suffix, content) pairs.
std::vector<std::pair<std::string, std::string>> plot_data(const std::vector<LoadedDoc>& docs);

}  // namespace optlaw
