#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "optlaw/errors.hpp"
#include "optlaw/fitter.hpp"
#include "optlaw/report.hpp"
#include "optlaw/run_store.hpp"
#include "optlaw/serialize.hpp"
#include "optlaw/spectral_sim.hpp"
#include "optlaw/validation.hpp"

namespace {

using nlohmann::json;
using namespace optlaw;

struct FitFlags {
    std::uint64_t seed = 0;
    double huber_delta = 1e-3;
    int max_iterations = 500;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
    cmd->add_option("--seed", f.seed, "seed recorded in output metadata");
    cmd->add_option("--huber-delta", f.huber_delta, "robust loss threshold on log residuals");
    cmd->add_option("--max-iter", f.max_iterations, "solver iteration cap per start");
}

FitConfig make_config(const FitFlags& f) {
    FitConfig cfg;
    cfg.seed = f.seed;
    cfg.huber_delta = f.huber_delta;
    cfg.max_iterations = f.max_iterations;
    return cfg;
}

long long parse_count_str(const std::string& s, const std::string& what) {
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v < 1)
        throw UsageError(what + " '" + s + "' is not a positive integer");
    return v;
}

std::vector<std::pair<long long, long long>> parse_grid(const std::string& spec) {
    std::vector<std::pair<long long, long long>> grid;
    if (std::filesystem::exists(spec)) {
        std::ifstream in(spec);
        if (!in) throw DataError("cannot open grid file '" + spec + "'");
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
            std::size_t first = line.find_first_not_of(' ');
            if (first == std::string::npos) continue;
            line = line.substr(first);
            if (line.empty() || line[0] == '#') continue;
            if (lineno == 1 && line == "d,k") continue;
            std::size_t comma = line.find(',');
            if (comma == std::string::npos)
                throw DataError("grid file line " + std::to_string(lineno) +
                                ": expected 'd,k'");
            grid.emplace_back(parse_count_str(line.substr(0, comma), "grid d"),
                              parse_count_str(line.substr(comma + 1), "grid k"));
        }
    } else {
        std::size_t pos = 0;
        while (pos <= spec.size()) {
            std::size_t semi = spec.find(';', pos);
            std::string cell =
                semi == std::string::npos ? spec.substr(pos) : spec.substr(pos, semi - pos);
            if (!cell.empty()) {
                std::size_t x = cell.find('x');
                if (x == std::string::npos)
                    throw UsageError("grid cell '" + cell + "' must look like DxK");
                grid.emplace_back(parse_count_str(cell.substr(0, x), "grid d"),
                                  parse_count_str(cell.substr(x + 1), "grid k"));
            }
            if (semi == std::string::npos) break;
            pos = semi + 1;
        }
    }
    if (grid.empty()) throw UsageError("grid '" + spec + "' is empty");
    return grid;
}

void write_json_doc(const std::string& path, const json& doc) {
    write_atomic(path, doc.dump(2) + "\n");
}

RunSet load_runs(const std::string& path) { return ingest_runs_file(path); }

FitPoints points_for(const RunSet& rs, const std::optional<std::string>& optimizer,
                     const std::optional<std::string>& arch, SecondAxis axis) {
    FilterCriteria crit;
    crit.optimizer = optimizer;
    crit.arch = arch;
    return to_log_points(filter_runs(rs, crit), axis);
}

void write_plot_files(const std::string& prefix, const std::vector<LoadedDoc>& docs) {
    for (const auto& [suffix, content] : plot_data(docs)) {
        std::string path = prefix + suffix;
        write_atomic(path, content);
        std::cout << "wrote " << path << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scaling-law fitting, validation, and spectral simulation toolkit"};
    app.set_version_flag("--version", std::string("optlaw ") + kArtifactVersion +
                                          " (schema " + kSchemaVersion + ")");
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "normalize raw runs into canonical CSV");
    std::string ingest_in, ingest_out, ingest_format;
    std::string ingest_unit, ingest_prov;
    ingest->add_option("--in", ingest_in, "input runs (.csv, .jsonl, .ndjson)")->required();
    ingest->add_option("--out", ingest_out, "canonical CSV path")->required();
    ingest->add_option("--format", ingest_format, "override format inference")
        ->check(CLI::IsMember({"csv", "jsonl"}));
    ingest->add_option("--compute-unit", ingest_unit, "unit tag for the compute column");
    ingest->add_option("--provenance", ingest_prov, "free-form source note");

    // fit
    auto* fit = app.add_subcommand("fit", "independent five-parameter fit for one optimizer");
    std::string fit_in, fit_out, fit_optimizer;
    std::optional<std::string> fit_arch;
    FitFlags fit_flags;
    fit->add_option("--in", fit_in, "canonical runs CSV")->required();
    fit->add_option("--optimizer", fit_optimizer, "optimizer label to fit")->required();
    fit->add_option("--arch", fit_arch, "restrict to one architecture");
    fit->add_option("--out", fit_out, "output JSON path")->required();
    add_fit_flags(fit, fit_flags);

    // fit-shared
    auto* fshared = app.add_subcommand("fit-shared",
                                       "reference-anchored fit with per-optimizer factors");
    std::string fs_in, fs_out, fs_reference;
    FitFlags fs_flags;
    fshared->add_option("--in", fs_in, "canonical runs CSV")->required();
    fshared->add_option("--reference", fs_reference, "reference optimizer")->required();
    fshared->add_option("--out", fs_out, "output JSON path")->required();
    add_fit_flags(fshared, fs_flags);

    // fit-compute
    auto* fcompute = app.add_subcommand("fit-compute",
                                        "shared fit on the (N, C) axes");
    std::string fc_in, fc_out, fc_reference;
    FitFlags fc_flags;
    fcompute->add_option("--in", fc_in, "runs CSV with a compute column")->required();
    fcompute->add_option("--reference", fc_reference, "reference optimizer")->required();
    fcompute->add_option("--out", fc_out, "output JSON path")->required();
    add_fit_flags(fcompute, fc_flags);

    // loocv
    auto* loo = app.add_subcommand("loocv", "leave-one-out refits and stability report");
    std::string loo_in, loo_out;
    std::optional<std::string> loo_optimizer, loo_reference, loo_corr_out, loo_shared_out,
        loo_plots;
    std::optional<double> loo_anchor_n, loo_anchor_d;
    bool loo_shared = false;
    FitFlags loo_flags;
    loo->add_option("--in", loo_in, "canonical runs CSV")->required();
    loo->add_option("--out", loo_out, "leave-one-out report JSON path")->required();
    loo->add_option("--optimizer", loo_optimizer, "single-optimizer mode: label to fit");
    loo->add_flag("--shared", loo_shared, "shared-pipeline mode (needs --reference)");
    loo->add_option("--reference", loo_reference, "reference optimizer for --shared");
    loo->add_option("--correlation-out", loo_corr_out, "also write correlation diagnostics");
    loo->add_option("--shared-out", loo_shared_out,
                    "also write the full shared fit with fold stddevs attached");
    loo->add_option("--anchor-n", loo_anchor_n, "anchor N_c (default: geometric mean)");
    loo->add_option("--anchor-d", loo_anchor_d, "anchor D_c (default: geometric mean)");
    loo->add_option("--plot-data", loo_plots, "prefix for scatter and iso-curve CSV files");
    add_fit_flags(loo, loo_flags);

    // extrapolate
    auto* extrap = app.add_subcommand("extrapolate",
                                      "fit below a size threshold, score above it");
    std::string ex_in, ex_out, ex_reference;
    double ex_threshold = 0.0;
    FitFlags ex_flags;
    extrap->add_option("--in", ex_in, "canonical runs CSV")->required();
    extrap->add_option("--reference", ex_reference, "reference optimizer")->required();
    extrap->add_option("--threshold", ex_threshold, "parameter-count split point")->required();
    extrap->add_option("--out", ex_out, "output JSON path")->required();
    add_fit_flags(extrap, ex_flags);

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate ground-truth runs from the spectral model");
    double sm_alpha = 0.0, sm_beta = 0.0, sm_gamma = 1.0, sm_delta = 0.0, sm_lstar = 0.0;
    double sm_noise = 0.0;
    long long sm_tps = 1;
    std::uint64_t sm_seed = 0;
    std::string sm_label = "theory", sm_grid, sm_out;
    sim->add_option("--alpha", sm_alpha, "eigenvalue decay exponent")->required();
    sim->add_option("--beta", sm_beta, "signal decay exponent")->required();
    sim->add_option("--gamma-l", sm_gamma, "step size fraction of 1/lambda_1, in (0, 1]");
    sim->add_option("--delta", sm_delta, "signal scale")->required();
    sim->add_option("--l-star", sm_lstar, "irreducible loss floor")->required();
    sim->add_option("--label", sm_label, "optimizer label stamped on the records");
    sim->add_option("--grid", sm_grid, "cells as 'DxK;DxK;...' or a d,k CSV file")->required();
    sim->add_option("--tokens-per-step", sm_tps, "tokens counted per optimizer step");
    sim->add_option("--noise", sm_noise, "multiplicative log-normal noise sigma");
    sim->add_option("--seed", sm_seed, "noise RNG seed");
    sim->add_option("--out", sm_out, "runs CSV path (breakdown sidecar: <out>.breakdown.json)")
        ->required();

    // report
    auto* rep = app.add_subcommand("report", "render result JSON files as text tables");
    std::vector<std::string> rep_inputs;
    std::optional<std::string> rep_out, rep_plots;
    rep->add_option("inputs", rep_inputs, "result JSON files")->required()->expected(-1);
    rep->add_option("--out", rep_out, "write the text report here instead of stdout");
    rep->add_option("--plot-data", rep_plots, "prefix for plot CSV files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(ingest)) {
            RunSet rs;
            if (!ingest_format.empty()) {
                std::ifstream in(ingest_in, std::ios::binary);
                if (!in) throw DataError("cannot open '" + ingest_in + "'");
                rs = ingest_runs(in, ingest_format == "csv" ? RunFormat::Csv
                                                            : RunFormat::JsonLines);
            } else {
                rs = ingest_runs_file(ingest_in);
            }
            if (!ingest_unit.empty()) rs.compute_unit = ingest_unit;
            if (!ingest_prov.empty()) rs.provenance = ingest_prov;
            std::string head;
            if (rs.compute_unit) head += "# compute_unit: " + *rs.compute_unit + "\n";
            if (!rs.provenance.empty()) head += "# provenance: " + rs.provenance + "\n";
            write_atomic(ingest_out, head + serialize_runs(rs));
            std::cout << "ingested " << rs.records.size() << " records\n";
        } else if (app.got_subcommand(fit)) {
            FitConfig cfg = make_config(fit_flags);
            FitPoints pts = points_for(load_runs(fit_in), fit_optimizer, fit_arch,
                                       SecondAxis::Data);
            FitResult r = fit_per_optimizer(pts, cfg);
            write_json_doc(fit_out, make_document("fit_result", to_json(r), cfg));
            std::cout << "fit " << fit_optimizer << ": train_fit_error "
                      << format_value(r.train_fit_error) << "\n";
        } else if (app.got_subcommand(fshared)) {
            FitConfig cfg = make_config(fs_flags);
            FitPoints pts = points_for(load_runs(fs_in), std::nullopt, std::nullopt,
                                       SecondAxis::Data);
            SharedFitResult r = fit_shared(pts, fs_reference, cfg);
            write_json_doc(fs_out, make_document("shared_fit_result", to_json(r), cfg));
            std::cout << "shared fit with reference " << fs_reference << ": "
                      << r.per_optimizer.size() << " optimizers\n";
        } else if (app.got_subcommand(fcompute)) {
            FitConfig cfg = make_config(fc_flags);
            FitPoints pts = points_for(load_runs(fc_in), std::nullopt, std::nullopt,
                                       SecondAxis::Compute);
            SharedFitResult r = fit_compute_form(pts, fc_reference, cfg);
            write_json_doc(fc_out, make_document("shared_fit_result", to_json(r), cfg));
            std::cout << "compute-form fit with reference " << fc_reference << ": "
                      << r.per_optimizer.size() << " optimizers\n";
        } else if (app.got_subcommand(loo)) {
            FitConfig cfg = make_config(loo_flags);
            if (loo_shared == loo_optimizer.has_value())
                throw UsageError("choose exactly one of --optimizer or --shared");
            if (loo_shared && !loo_reference)
                throw UsageError("--shared needs --reference");
            RunSet rs = load_runs(loo_in);

            LooReport report;
            FitPoints pts;
            if (loo_shared) {
                pts = points_for(rs, std::nullopt, std::nullopt, SecondAxis::Data);
                LooProcedure proc = shared_procedure(pts, *loo_reference, cfg);
                report = loocv(pts, proc, cfg);
            } else {
                pts = points_for(rs, loo_optimizer, std::nullopt, SecondAxis::Data);
                LooProcedure proc = chinchilla_procedure(cfg);
                proc.label = *loo_optimizer;
                report = loocv(pts, proc, cfg);
            }
            json loo_doc = make_document("loo_report", to_json(report), cfg);
            write_json_doc(loo_out, loo_doc);
            std::cout << "leave-one-out over " << report.samples.size()
                      << " folds: test_fit_error " << format_value(report.test_fit_error)
                      << "\n";

            std::optional<json> corr_doc;
            if (loo_corr_out || loo_plots) {
                auto anchors = default_anchors(pts);
                if (loo_anchor_n) anchors.first = *loo_anchor_n;
                if (loo_anchor_d) anchors.second = *loo_anchor_d;
                CorrelationReport corr = correlation_diagnostics(report, anchors);
                corr_doc = make_document("correlation_report", to_json(corr), cfg);
                if (loo_corr_out) write_json_doc(*loo_corr_out, *corr_doc);
            }
            if (loo_shared_out) {
                if (!loo_shared)
                    throw UsageError("--shared-out applies only to --shared mode");
                SharedFitResult full = fit_shared(pts, *loo_reference, cfg);
                std::size_t idx = 5;
                for (auto& [label, entry] : full.per_optimizer) {
                    if (label == *loo_reference) continue;
                    entry.rho_n_std = report.stddev[idx];
                    entry.rho_second_std = report.stddev[idx + 1];
                    idx += 2;
                }
                write_json_doc(*loo_shared_out,
                               make_document("shared_fit_result", to_json(full), cfg));
            }
            if (loo_plots) {
                std::vector<LoadedDoc> docs;
                docs.push_back({"loo_report", loo_out, loo_doc});
                if (corr_doc) docs.push_back({"correlation_report", "correlation", *corr_doc});
                write_plot_files(*loo_plots, docs);
            }
        } else if (app.got_subcommand(extrap)) {
            FitConfig cfg = make_config(ex_flags);
            RunSet rs = load_runs(ex_in);
            if (!(ex_threshold > 0.0) || ex_threshold > 9e18)
                throw UsageError("--threshold must be a positive parameter count");
            ExtrapolationReport r = extrapolation_eval(
                rs, static_cast<long long>(std::llround(ex_threshold)), ex_reference, cfg);
            write_json_doc(ex_out, make_document("extrapolation_report", to_json(r), cfg));
            std::cout << "extrapolation ratio (naive/shared): "
                      << format_value(r.ratio_overall) << "\n";
        } else if (app.got_subcommand(sim)) {
            SpectrumConfig cfg;
            cfg.alpha_spec = sm_alpha;
            cfg.beta_spec = sm_beta;
            cfg.gamma_l = sm_gamma;
            cfg.delta_scale = sm_delta;
            cfg.l_star = sm_lstar;
            cfg.label = sm_label;
            auto grid = parse_grid(sm_grid);
            RunSet rs = generate_theory_runs(cfg, grid, sm_tps, sm_noise, sm_seed);
            write_atomic(sm_out, serialize_runs(rs));

            json cells = json::array();
            for (auto [d, k] : grid) cells.push_back(to_json(closed_form_excess(cfg, d, k)));
            json sim_cfg{{"alpha_spec", sm_alpha},   {"beta_spec", sm_beta},
                         {"gamma_l", sm_gamma},      {"delta_scale", sm_delta},
                         {"l_star", sm_lstar},       {"label", sm_label},
                         {"tokens_per_step", sm_tps}, {"noise_sigma", sm_noise}};
            write_json_doc(sm_out + ".breakdown.json",
                           make_document("breakdown_set", json{{"cells", cells}}, sim_cfg,
                                         sm_seed));
            std::cout << "simulated " << grid.size() << " cells\n";
        } else if (app.got_subcommand(rep)) {
            std::vector<LoadedDoc> docs;
            for (const auto& path : rep_inputs) {
                LoadedDoc doc;
                doc.source = path;
                doc.payload = load_document(path, doc.type);
                docs.push_back(std::move(doc));
            }
            std::string text = render_report(docs);
            if (rep_out) {
                write_atomic(*rep_out, text);
                std::cout << "wrote " << *rep_out << "\n";
            } else {
                std::cout << text;
            }
            if (rep_plots) write_plot_files(*rep_plots, docs);
        }
    } catch (const Error& e) {
        std::cerr << json{{"error", e.what()}, {"exit_code", e.exit_code()}}.dump() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}, {"exit_code", 1}}.dump() << "\n";
        return 1;
    }
    return 0;
}
