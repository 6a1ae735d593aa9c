#include "optlaw/run_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "optlaw/errors.hpp"

namespace optlaw {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

long long parse_count(const std::string& s, int line, const char* col) {
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw DataError("line " + std::to_string(line) + ": malformed " + col +
                        " '" + s + "' (expected integer)");
    return v;
}

double parse_real(const std::string& s, int line, const char* col) {
    if (s.empty())
        throw DataError("line " + std::to_string(line) + ": missing " + col);
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || !std::isfinite(v))
        throw DataError("line " + std::to_string(line) + ": malformed " + col +
                        " '" + s + "'");
    return v;
}

void validate_record(const RunRecord& r, int line) {
    if (r.optimizer.empty())
        throw DataError("line " + std::to_string(line) + ": empty optimizer label");
    if (r.arch.empty())
        throw DataError("line " + std::to_string(line) + ": empty arch label");
    if (r.n_params <= 0)
        throw DataError("line " + std::to_string(line) + ": n_params must be positive");
    if (r.tokens <= 0)
        throw DataError("line " + std::to_string(line) + ": tokens must be positive");
    if (!(r.loss > 0.0))
        throw DataError("line " + std::to_string(line) + ": loss must be positive");
    if (r.compute && !(*r.compute > 0.0))
        throw DataError("line " + std::to_string(line) + ": compute must be positive");
}

bool close_rel(double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
}

// Returns true when the duplicate can be collapsed silently.
bool same_payload(const RunRecord& a, const RunRecord& b) {
    if (!close_rel(a.loss, b.loss)) return false;
    if (a.compute.has_value() != b.compute.has_value()) return false;
    if (a.compute && !close_rel(*a.compute, *b.compute)) return false;
    return true;
}

using DedupKey = std::tuple<std::string, std::string, long long, long long>;

void add_record(RunSet& rs, std::map<DedupKey, std::pair<std::size_t, int>>& seen,
                RunRecord rec, int line) {
    validate_record(rec, line);
    DedupKey key{rec.optimizer, rec.arch, rec.n_params, rec.tokens};
    auto it = seen.find(key);
    if (it != seen.end()) {
        const RunRecord& prev = rs.records[it->second.first];
        if (same_payload(prev, rec)) return;
        throw DataError("line " + std::to_string(line) + ": duplicate key (" +
                        rec.optimizer + ", " + rec.arch + ", " +
                        std::to_string(rec.n_params) + ", " + std::to_string(rec.tokens) +
                        ") conflicts with line " + std::to_string(it->second.second) +
                        " (losses differ)");
    }
    seen.emplace(key, std::make_pair(rs.records.size(), line));
    rs.records.push_back(std::move(rec));
}

RunSet ingest_csv(std::istream& in) {
    RunSet rs;
    std::map<DedupKey, std::pair<std::size_t, int>> seen;
    std::string line;
    int lineno = 0;
    bool saw_header = false;
    bool has_compute_col = false;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto cells = split_csv(t);
        if (!saw_header) {
            if (cells.size() == 5 && cells[0] == "optimizer" && cells[1] == "arch" &&
                cells[2] == "n_params" && cells[3] == "tokens" && cells[4] == "loss") {
                has_compute_col = false;
            } else if (cells.size() == 6 && cells[0] == "optimizer" && cells[1] == "arch" &&
                       cells[2] == "n_params" && cells[3] == "tokens" && cells[4] == "loss" &&
                       cells[5] == "compute") {
                has_compute_col = true;
            } else {
                throw DataError("line " + std::to_string(lineno) +
                                ": expected header 'optimizer,arch,n_params,tokens,loss[,compute]'");
            }
            saw_header = true;
            continue;
        }
        std::size_t want = has_compute_col ? 6 : 5;
        if (cells.size() != want)
            throw DataError("line " + std::to_string(lineno) + ": expected " +
                            std::to_string(want) + " columns, got " +
                            std::to_string(cells.size()));
        RunRecord rec;
        rec.optimizer = cells[0];
        rec.arch = cells[1];
        rec.n_params = parse_count(cells[2], lineno, "n_params");
        rec.tokens = parse_count(cells[3], lineno, "tokens");
        rec.loss = parse_real(cells[4], lineno, "loss");
        if (has_compute_col && !cells[5].empty())
            rec.compute = parse_real(cells[5], lineno, "compute");
        add_record(rs, seen, std::move(rec), lineno);
    }
    if (!saw_header) throw DataError("empty input: no header line found");
    return rs;
}

RunSet ingest_jsonl(std::istream& in) {
    RunSet rs;
    std::map<DedupKey, std::pair<std::size_t, int>> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(t);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("line " + std::to_string(lineno) + ": malformed JSON: " + e.what());
        }
        if (!j.is_object())
            throw DataError("line " + std::to_string(lineno) + ": expected a JSON object");
        for (auto& [key, _] : j.items()) {
            if (key != "optimizer" && key != "arch" && key != "n_params" &&
                key != "tokens" && key != "loss" && key != "compute")
                throw DataError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
        RunRecord rec;
        try {
            rec.optimizer = j.at("optimizer").get<std::string>();
            rec.arch = j.at("arch").get<std::string>();
            if (!j.at("n_params").is_number_integer())
                throw DataError("line " + std::to_string(lineno) + ": n_params must be an integer");
            if (!j.at("tokens").is_number_integer())
                throw DataError("line " + std::to_string(lineno) + ": tokens must be an integer");
            rec.n_params = j.at("n_params").get<long long>();
            rec.tokens = j.at("tokens").get<long long>();
            rec.loss = j.at("loss").get<double>();
            if (j.contains("compute")) rec.compute = j.at("compute").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError("line " + std::to_string(lineno) + ": " + e.what());
        }
        add_record(rs, seen, std::move(rec), lineno);
    }
    if (rs.records.empty() && lineno == 0)
        throw DataError("empty input");
    return rs;
}

std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

}  // namespace

RunSet ingest_runs(std::istream& in, RunFormat format) {
    return format == RunFormat::Csv ? ingest_csv(in) : ingest_jsonl(in);
}

RunSet ingest_runs_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file: " + path);
    RunFormat fmt = RunFormat::Csv;
    if (path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl") fmt = RunFormat::JsonLines;
    if (path.size() >= 7 && path.substr(path.size() - 7) == ".ndjson") fmt = RunFormat::JsonLines;
    return ingest_runs(in, fmt);
}

std::string serialize_runs(const RunSet& rs) {
    bool any_compute = std::any_of(rs.records.begin(), rs.records.end(),
                                   [](const RunRecord& r) { return r.compute.has_value(); });
    std::string out = any_compute ? "optimizer,arch,n_params,tokens,loss,compute\n"
                                  : "optimizer,arch,n_params,tokens,loss\n";
    for (const RunRecord& r : rs.records) {
        out += r.optimizer + "," + r.arch + "," + std::to_string(r.n_params) + "," +
               std::to_string(r.tokens) + "," + format_double(r.loss);
        if (any_compute) {
            out += ",";
            if (r.compute) out += format_double(*r.compute);
        }
        out += "\n";
    }
    return out;
}

RunSet filter_runs(const RunSet& rs, const FilterCriteria& criteria) {
    if (criteria.min_n && criteria.max_n && *criteria.min_n > *criteria.max_n)
        throw UsageError("contradictory bounds: min_n " + std::to_string(*criteria.min_n) +
                         " > max_n " + std::to_string(*criteria.max_n));
    RunSet out;
    out.compute_unit = rs.compute_unit;
    out.provenance = rs.provenance;
    for (const RunRecord& r : rs.records) {
        if (criteria.optimizer && r.optimizer != *criteria.optimizer) continue;
        if (criteria.arch && r.arch != *criteria.arch) continue;
        if (criteria.min_n && r.n_params < *criteria.min_n) continue;
        if (criteria.max_n && r.n_params > *criteria.max_n) continue;
        out.records.push_back(r);
    }
    return out;
}

FitPoints to_log_points(const RunSet& rs, SecondAxis axis) {
    FitPoints pts;
    pts.axis = axis;
    pts.log_n.reserve(rs.records.size());
    for (std::size_t i = 0; i < rs.records.size(); ++i) {
        const RunRecord& r = rs.records[i];
        double second;
        if (axis == SecondAxis::Data) {
            second = static_cast<double>(r.tokens);
        } else {
            if (!r.compute)
                throw DataError("record " + std::to_string(i) + " (" + r.optimizer +
                                ", N=" + std::to_string(r.n_params) +
                                ") has no compute value; compute-form fit needs one");
            second = *r.compute;
        }
        pts.log_n.push_back(std::log(static_cast<double>(r.n_params)));
        pts.log_d.push_back(std::log(second));
        pts.log_loss.push_back(std::log(r.loss));
        pts.optimizer.push_back(r.optimizer);
    }
    return pts;
}

}  // namespace optlaw
