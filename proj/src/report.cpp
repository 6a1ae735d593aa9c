#include "optlaw/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "optlaw/errors.hpp"

namespace optlaw {

namespace {

using nlohmann::json;

std::string fmt_shortest(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, end);
}

std::string table(const std::vector<std::vector<std::string>>& rows) {
    std::size_t cols = 0;
    for (const auto& row : rows) cols = std::max(cols, row.size());
    std::vector<std::size_t> width(cols, 0);
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c)
            width[c] = std::max(width[c], row[c].size());

    std::ostringstream out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::string line;
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            std::string cell = rows[r][c];
            cell.resize(width[c], ' ');
            if (c) line += "  ";
            line += cell;
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out << line << '\n';
        if (r == 0) {
            std::size_t total = 0;
            for (std::size_t c = 0; c < cols; ++c) total += width[c] + (c ? 2 : 0);
            out << std::string(total, '-') << '\n';
        }
    }
    return out.str();
}

std::string stem_of(const std::string& source) {
    std::size_t slash = source.find_last_of("/\\");
    std::string name = slash == std::string::npos ? source : source.substr(slash + 1);
    std::size_t dot = name.find_last_of('.');
    if (dot != std::string::npos && dot > 0) name = name.substr(0, dot);
    for (char& ch : name)
        if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
    return name.empty() ? "report" : name;
}

std::string second_key(const json& payload) {
    return payload.at("axis").get<std::string>() == "compute" ? "rho_C" : "rho_D";
}

std::string cell_pm(const json& value, const json& std_value) {
    if (std_value.is_null()) return format_value(value.get<double>());
    return format_pm(value.get<double>(), std_value.get<double>());
}

void render_fit_results(std::ostringstream& out, const std::vector<const LoadedDoc*>& docs) {
    out << "fit results\n";
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"source", "kind", "A", "alpha", "B", "beta", "E", "train_fit_error",
                    "converged"});
    for (const auto* doc : docs) {
        const json& theta = doc->payload.at("theta");
        rows.push_back({doc->source, doc->payload.at("kind").get<std::string>(),
                        format_value(theta.at("A").get<double>()),
                        format_value(theta.at("alpha").get<double>()),
                        format_value(theta.at("B").get<double>()),
                        format_value(theta.at("beta").get<double>()),
                        format_value(theta.at("E").get<double>()),
                        format_value(doc->payload.at("train_fit_error").get<double>()),
                        doc->payload.at("converged").get<bool>() ? "yes" : "no"});
    }
    out << table(rows) << '\n';
}

void render_shared(std::ostringstream& out, const LoadedDoc& doc) {
    const json& p = doc.payload;
    const std::string second = second_key(p);
    out << "shared fit (" << doc.source << ")\n";
    out << "reference: " << p.at("reference_optimizer").get<std::string>() << "  axis: "
        << p.at("axis").get<std::string>() << '\n';
    const json& theta = p.at("theta_ref");
    out << "theta_ref: A=" << format_value(theta.at("A").get<double>())
        << "  alpha=" << format_value(theta.at("alpha").get<double>())
        << "  B=" << format_value(theta.at("B").get<double>())
        << "  beta=" << format_value(theta.at("beta").get<double>())
        << "  E=" << format_value(theta.at("E").get<double>()) << '\n';
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"optimizer", "rho_N", second, "fit_error"});
    for (const auto& [label, entry] : p.at("per_optimizer").items()) {
        rows.push_back({label, cell_pm(entry.at("rho_N"), entry.at("rho_N_std")),
                        cell_pm(entry.at(second), entry.at(second + "_std")),
                        format_value(entry.at("fit_error").get<double>())});
    }
    out << table(rows) << '\n';
}

void render_loo(std::ostringstream& out, const LoadedDoc& doc) {
    const json& p = doc.payload;
    out << "leave-one-out (" << doc.source << ")  optimizer: "
        << p.at("optimizer").get<std::string>() << '\n';
    const auto names = p.at("param_names").get<std::vector<std::string>>();
    const auto full = p.at("full_fit").get<std::vector<double>>();
    const auto stddev = p.at("stddev").get<std::vector<double>>();
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"param", "estimate"});
    for (std::size_t j = 0; j < names.size(); ++j)
        rows.push_back({names[j], format_pm(full[j], stddev[j])});
    out << table(rows);
    out << "test_fit_error: " << format_value(p.at("test_fit_error").get<double>())
        << "\n\n";
}

void render_correlation(std::ostringstream& out, const LoadedDoc& doc) {
    const json& p = doc.payload;
    auto opt_cell = [&](const char* key) {
        const json& v = p.at(key);
        return v.is_null() ? std::string("undefined") : format_value(v.get<double>());
    };
    out << "correlation diagnostics (" << doc.source << ")\n";
    out << "anchor_N: " << format_value(p.at("anchor_N").get<double>())
        << "  anchor_D: " << format_value(p.at("anchor_D").get<double>()) << '\n';
    out << "corr(ln A, alpha): " << opt_cell("corr_lnA_alpha") << '\n';
    out << "corr(ln B, beta):  " << opt_cell("corr_lnB_beta") << '\n';
    out << "cv(A / N_c^alpha): " << opt_cell("cv_a_over_anchor") << "  (cv A: "
        << opt_cell("cv_A") << ")\n";
    out << "cv(B / D_c^beta):  " << opt_cell("cv_b_over_anchor") << "  (cv B: "
        << opt_cell("cv_B") << ")\n\n";
}

void render_extrapolation(std::ostringstream& out, const LoadedDoc& doc) {
    const json& p = doc.payload;
    out << "extrapolation (" << doc.source << ")  threshold_n: "
        << p.at("threshold_n").get<long long>() << "  reference: "
        << p.at("reference").get<std::string>() << '\n';
    const auto optimizers = p.at("optimizers").get<std::vector<std::string>>();
    const auto naive = p.at("naive_mse").get<std::vector<double>>();
    const auto shared = p.at("shared_mse").get<std::vector<double>>();
    const auto ratio = p.at("ratio").get<std::vector<double>>();
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"optimizer", "naive_mse", "shared_mse", "ratio"});
    for (std::size_t i = 0; i < optimizers.size(); ++i)
        rows.push_back({optimizers[i], format_value(naive[i]), format_value(shared[i]),
                        format_value(ratio[i])});
    rows.push_back({"(mean)", format_value(p.at("naive_mse_mean").get<double>()),
                    format_value(p.at("shared_mse_mean").get<double>()),
                    format_value(p.at("ratio_overall").get<double>())});
    out << table(rows) << '\n';
}

}  // namespace

std::string format_pm(double value, double std_value) {
    int decimals = std::abs(value) >= 100.0 ? 0 : 2;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.*f ± %.*f", decimals, value, decimals, std_value);
    return buf;
}

std::string format_value(double value) {
    if (std::nearbyint(value) == value && std::abs(value) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(value));
        return buf;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return buf;
}

std::string render_report(const std::vector<LoadedDoc>& docs) {
    if (docs.empty()) throw UsageError("no documents to report on");

    std::vector<const LoadedDoc*> fits;
    std::ostringstream out;
    for (const auto& doc : docs)
        if (doc.type == "fit_result") fits.push_back(&doc);
    if (!fits.empty()) render_fit_results(out, fits);
    for (const auto& doc : docs)
        if (doc.type == "shared_fit_result") render_shared(out, doc);
    for (const auto& doc : docs)
        if (doc.type == "loo_report") render_loo(out, doc);
    for (const auto& doc : docs)
        if (doc.type == "correlation_report") render_correlation(out, doc);
    for (const auto& doc : docs)
        if (doc.type == "extrapolation_report") render_extrapolation(out, doc);
    for (const auto& doc : docs)
        if (doc.type != "fit_result" && doc.type != "shared_fit_result" &&
            doc.type != "loo_report" && doc.type != "correlation_report" &&
            doc.type != "extrapolation_report")
            throw DataError("unsupported document type '" + doc.type + "' in '" +
                            doc.source + "'");

    std::string text = out.str();
    while (text.size() > 1 && text[text.size() - 1] == '\n' && text[text.size() - 2] == '\n')
        text.pop_back();
    return text;
}

std::vector<std::pair<std::string, std::string>> plot_data(const std::vector<LoadedDoc>& docs) {
    std::vector<std::pair<std::string, std::string>> files;

    const LoadedDoc* corr = nullptr;
    for (const auto& doc : docs)
        if (doc.type == "correlation_report" && !corr) corr = &doc;

    for (const auto& doc : docs) {
        if (doc.type != "loo_report") continue;
        const json& p = doc.payload;
        const auto names = p.at("param_names").get<std::vector<std::string>>();
        if (names.size() < 5 || names[0] != "A" || names[1] != "alpha" || names[2] != "B" ||
            names[3] != "beta")
            continue;
        const auto samples = p.at("samples").get<std::vector<std::vector<double>>>();
        const std::string stem = stem_of(doc.source);

        std::string alpha_csv = "alpha,A\n";
        std::string beta_csv = "beta,B\n";
        for (const auto& s : samples) {
            alpha_csv += fmt_shortest(s[1]) + "," + fmt_shortest(s[0]) + "\n";
            beta_csv += fmt_shortest(s[3]) + "," + fmt_shortest(s[2]) + "\n";
        }
        files.emplace_back(stem + "_scatter_alpha_A.csv", std::move(alpha_csv));
        files.emplace_back(stem + "_scatter_beta_B.csv", std::move(beta_csv));

        if (!corr) continue;
        const json& c = corr->payload;
        auto iso = [&](int exp_idx, double anchor, const char* const_key,
                       const char* head) {
            double lo = samples[0][exp_idx], hi = lo;
            for (const auto& s : samples) {
                lo = std::min(lo, s[exp_idx]);
                hi = std::max(hi, s[exp_idx]);
            }
            if (lo == hi) {
                lo *= 0.95;
                hi *= 1.05;
            }
            const auto values = c.at(const_key).get<std::vector<double>>();
            double mean = 0.0;
            for (double v : values) mean += v;
            mean /= static_cast<double>(values.size());
            std::string csv = std::string(head) + "\n";
            const int steps = 50;
            for (int t = 0; t <= steps; ++t) {
                double x = lo + (hi - lo) * static_cast<double>(t) / steps;
                double y = mean * std::exp(x * std::log(anchor));
                csv += fmt_shortest(x) + "," + fmt_shortest(y) + "\n";
            }
            return csv;
        };
        files.emplace_back(stem + "_iso_alpha_A.csv",
                           iso(1, c.at("anchor_N").get<double>(), "a_over_anchor", "alpha,A"));
        files.emplace_back(stem + "_iso_beta_B.csv",
                           iso(3, c.at("anchor_D").get<double>(), "b_over_anchor", "beta,B"));
    }

    std::string bars = "source,optimizer,naive_mse,shared_mse\n";
    bool any_extrap = false;
    for (const auto& doc : docs) {
        if (doc.type != "extrapolation_report") continue;
        any_extrap = true;
        const json& p = doc.payload;
        const auto optimizers = p.at("optimizers").get<std::vector<std::string>>();
        const auto naive = p.at("naive_mse").get<std::vector<double>>();
        const auto shared = p.at("shared_mse").get<std::vector<double>>();
        for (std::size_t i = 0; i < optimizers.size(); ++i)
            bars += stem_of(doc.source) + "," + optimizers[i] + "," + fmt_shortest(naive[i]) +
                    "," + fmt_shortest(shared[i]) + "\n";
    }
    if (any_extrap) files.emplace_back("extrapolation_bars.csv", std::move(bars));

    return files;
}

}  // namespace optlaw
