#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace optlaw {

// One training run: (optimizer, architecture, N, D, L) plus optional compute.
struct RunRecord {
    std::string optimizer;
    std::string arch;
    long long n_params = 0;
    long long tokens = 0;
    double loss = 0.0;
    std::optional<double> compute;

    bool operator==(const RunRecord&) const = default;
};

struct RunSet {
    std::vector<RunRecord> records;
    std::optional<std::string> compute_unit;
    std::string provenance;
};

// Which quantity fills the second covariate: tokens D or compute C.
enum class SecondAxis { Data, Compute };

// Fit-ready log-space points. log_d holds ln D on the Data axis and ln C on
// the Compute axis.
struct FitPoints {
    std::vector<double> log_n;
    std::vector<double> log_d;
    std::vector<double> log_loss;
    std::vector<std::string> optimizer;
    SecondAxis axis = SecondAxis::Data;

    std::size_t size() const { return log_n.size(); }
};

enum class RunFormat { Csv, JsonLines };

struct FilterCriteria {
    std::optional<std::string> optimizer;
    std::optional<std::string> arch;
    std::optional<long long> min_n;
    std::optional<long long> max_n;
};

// Parses CSV (header "optimizer,arch,n_params,tokens,loss[,compute]") or
// JSON-lines with the same keys. Lines starting with '#' are ignored. Rows
// failing validation raise DataError naming the 1-based line number.
RunSet ingest_runs(std::istream& in, RunFormat format);

// Format inferred from extension: .csv -> Csv, .jsonl/.ndjson -> JsonLines.
RunSet ingest_runs_file(const std::string& path);

// Canonical CSV (includes the compute column iff any record carries compute).
// ingest(serialize(rs)) reproduces rs.records exactly.
std::string serialize_runs(const RunSet& rs);

RunSet filter_runs(const RunSet& rs, const FilterCriteria& criteria);

FitPoints to_log_points(const RunSet& rs, SecondAxis axis = SecondAxis::Data);

}  // namespace optlaw
