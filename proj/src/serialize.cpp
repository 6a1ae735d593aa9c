#include "optlaw/serialize.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "optlaw/errors.hpp"

namespace optlaw {

namespace {

using nlohmann::json;

json opt_to_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

std::optional<double> opt_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

std::string axis_name(SecondAxis axis) {
    return axis == SecondAxis::Compute ? "compute" : "data";
}

SecondAxis axis_from_name(const std::string& name) {
    if (name == "data") return SecondAxis::Data;
    if (name == "compute") return SecondAxis::Compute;
    throw DataError("unknown axis '" + name + "'");
}

std::string rho_second_key(SecondAxis axis) {
    return axis == SecondAxis::Compute ? "rho_C" : "rho_D";
}

std::string kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Chinchilla: return "chinchilla";
        case ModelKind::SharedRho: return "shared_rho";
        case ModelKind::ComputeRho: return "compute_rho";
        case ModelKind::DataEfficiency: return "data_efficiency";
    }
    throw DataError("unknown model kind");
}

ModelKind kind_from_name(const std::string& name) {
    if (name == "chinchilla") return ModelKind::Chinchilla;
    if (name == "shared_rho") return ModelKind::SharedRho;
    if (name == "compute_rho") return ModelKind::ComputeRho;
    if (name == "data_efficiency") return ModelKind::DataEfficiency;
    throw DataError("unknown model kind '" + name + "'");
}

template <typename F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed ") + what + ": " + e.what());
    }
}

}  // namespace

json to_json(const LawParams& p) {
    return json{{"A", p.a}, {"alpha", p.alpha}, {"B", p.b}, {"beta", p.beta}, {"E", p.e}};
}

LawParams law_params_from_json(const json& j) {
    return guarded("law parameters", [&] {
        LawParams p;
        p.a = j.at("A").get<double>();
        p.alpha = j.at("alpha").get<double>();
        p.b = j.at("B").get<double>();
        p.beta = j.at("beta").get<double>();
        p.e = j.at("E").get<double>();
        return p;
    });
}

json to_json(const OptimizerFactors& f) {
    json j{{"axis", axis_name(f.axis)}, {"rho_N", f.rho_n}};
    j[rho_second_key(f.axis)] = f.rho_second;
    return j;
}

OptimizerFactors factors_from_json(const json& j) {
    return guarded("optimizer factors", [&] {
        OptimizerFactors f;
        f.axis = axis_from_name(j.at("axis").get<std::string>());
        f.rho_n = j.at("rho_N").get<double>();
        f.rho_second = j.at(rho_second_key(f.axis)).get<double>();
        return f;
    });
}

json to_json(const FitConfig& c) {
    return json{
        {"huber_delta", c.huber_delta},
        {"max_iterations", c.max_iterations},
        {"gradient_tolerance", c.gradient_tolerance},
        {"step_tolerance", c.step_tolerance},
        {"seed", c.seed},
        {"alpha_starts", c.alpha_starts},
        {"beta_starts", c.beta_starts},
        {"scale_starts", c.scale_starts},
        {"e_fracs", c.e_fracs},
        {"bounds",
         json{{"alpha_lo", c.bounds.alpha_lo},
              {"alpha_hi", c.bounds.alpha_hi},
              {"beta_lo", c.bounds.beta_lo},
              {"beta_hi", c.bounds.beta_hi},
              {"scale_lo", c.bounds.scale_lo},
              {"scale_hi", c.bounds.scale_hi},
              {"rho_lo", c.bounds.rho_lo},
              {"rho_hi", c.bounds.rho_hi}}},
    };
}

json to_json(const FitResult& r) {
    json j{{"kind", kind_name(r.kind)},
           {"theta", to_json(r.theta)},
           {"objective", r.objective},
           {"train_fit_error", r.train_fit_error},
           {"converged", r.converged},
           {"iterations", r.iterations},
           {"start_index", r.start_index}};
    j["factors"] = r.factors ? to_json(*r.factors) : json(nullptr);
    return j;
}

FitResult fit_result_from_json(const json& j) {
    return guarded("fit result", [&] {
        FitResult r;
        r.kind = kind_from_name(j.at("kind").get<std::string>());
        r.theta = law_params_from_json(j.at("theta"));
        if (!j.at("factors").is_null()) r.factors = factors_from_json(j.at("factors"));
        r.objective = j.at("objective").get<double>();
        r.train_fit_error = j.at("train_fit_error").get<double>();
        r.converged = j.at("converged").get<bool>();
        r.iterations = j.at("iterations").get<int>();
        r.start_index = j.at("start_index").get<int>();
        return r;
    });
}

json to_json(const SharedFitResult& r) {
    const std::string second = rho_second_key(r.axis);
    json per = json::object();
    for (const auto& [label, entry] : r.per_optimizer) {
        json e{{"rho_N", entry.factors.rho_n},
               {"fit_error", entry.fit_error},
               {"rho_N_std", opt_to_json(entry.rho_n_std)}};
        e[second] = entry.factors.rho_second;
        e[second + "_std"] = opt_to_json(entry.rho_second_std);
        per[label] = std::move(e);
    }
    return json{{"reference_optimizer", r.reference_optimizer},
                {"axis", axis_name(r.axis)},
                {"theta_ref", to_json(r.theta_ref)},
                {"reference_fit", to_json(r.reference_fit)},
                {"per_optimizer", std::move(per)}};
}

SharedFitResult shared_fit_from_json(const json& j) {
    return guarded("shared fit result", [&] {
        SharedFitResult r;
        r.reference_optimizer = j.at("reference_optimizer").get<std::string>();
        r.axis = axis_from_name(j.at("axis").get<std::string>());
        r.theta_ref = law_params_from_json(j.at("theta_ref"));
        r.reference_fit = fit_result_from_json(j.at("reference_fit"));
        const std::string second = rho_second_key(r.axis);
        for (const auto& [label, e] : j.at("per_optimizer").items()) {
            SharedOptimizerEntry entry;
            entry.factors.axis = r.axis;
            entry.factors.rho_n = e.at("rho_N").get<double>();
            entry.factors.rho_second = e.at(second).get<double>();
            entry.fit_error = e.at("fit_error").get<double>();
            entry.rho_n_std = opt_from_json(e.at("rho_N_std"));
            entry.rho_second_std = opt_from_json(e.at(second + "_std"));
            r.per_optimizer[label] = std::move(entry);
        }
        return r;
    });
}

json to_json(const LooReport& r) {
    return json{{"param_names", r.param_names},
                {"full_fit", r.full_fit},
                {"mean", r.mean},
                {"stddev", r.stddev},
                {"samples", r.samples},
                {"held_out_error", r.held_out_error},
                {"test_fit_error", r.test_fit_error},
                {"optimizer", r.optimizer}};
}

LooReport loo_report_from_json(const json& j) {
    return guarded("leave-one-out report", [&] {
        LooReport r;
        r.param_names = j.at("param_names").get<std::vector<std::string>>();
        r.full_fit = j.at("full_fit").get<std::vector<double>>();
        r.mean = j.at("mean").get<std::vector<double>>();
        r.stddev = j.at("stddev").get<std::vector<double>>();
        r.samples = j.at("samples").get<std::vector<std::vector<double>>>();
        r.held_out_error = j.at("held_out_error").get<std::vector<double>>();
        r.test_fit_error = j.at("test_fit_error").get<double>();
        r.optimizer = j.at("optimizer").get<std::string>();
        return r;
    });
}

json to_json(const CorrelationReport& r) {
    return json{{"anchor_N", r.anchor_n},
                {"anchor_D", r.anchor_d},
                {"corr_lnA_alpha", opt_to_json(r.corr_ln_a_alpha)},
                {"corr_lnB_beta", opt_to_json(r.corr_ln_b_beta)},
                {"a_over_anchor", r.a_over_nc},
                {"b_over_anchor", r.b_over_dc},
                {"cv_a_over_anchor", opt_to_json(r.cv_a_over_nc)},
                {"cv_b_over_anchor", opt_to_json(r.cv_b_over_dc)},
                {"cv_A", opt_to_json(r.cv_a)},
                {"cv_B", opt_to_json(r.cv_b)}};
}

CorrelationReport correlation_report_from_json(const json& j) {
    return guarded("correlation report", [&] {
        CorrelationReport r;
        r.anchor_n = j.at("anchor_N").get<double>();
        r.anchor_d = j.at("anchor_D").get<double>();
        r.corr_ln_a_alpha = opt_from_json(j.at("corr_lnA_alpha"));
        r.corr_ln_b_beta = opt_from_json(j.at("corr_lnB_beta"));
        r.a_over_nc = j.at("a_over_anchor").get<std::vector<double>>();
        r.b_over_dc = j.at("b_over_anchor").get<std::vector<double>>();
        r.cv_a_over_nc = opt_from_json(j.at("cv_a_over_anchor"));
        r.cv_b_over_dc = opt_from_json(j.at("cv_b_over_anchor"));
        r.cv_a = opt_from_json(j.at("cv_A"));
        r.cv_b = opt_from_json(j.at("cv_B"));
        return r;
    });
}

json to_json(const ExtrapolationReport& r) {
    return json{{"threshold_n", r.threshold_n},
                {"reference", r.reference},
                {"optimizers", r.optimizers},
                {"naive_mse", r.naive_mse},
                {"shared_mse", r.shared_mse},
                {"ratio", r.ratio},
                {"naive_mse_mean", r.naive_mse_mean},
                {"shared_mse_mean", r.shared_mse_mean},
                {"ratio_overall", r.ratio_overall}};
}

ExtrapolationReport extrapolation_report_from_json(const json& j) {
    return guarded("extrapolation report", [&] {
        ExtrapolationReport r;
        r.threshold_n = j.at("threshold_n").get<long long>();
        r.reference = j.at("reference").get<std::string>();
        r.optimizers = j.at("optimizers").get<std::vector<std::string>>();
        r.naive_mse = j.at("naive_mse").get<std::vector<double>>();
        r.shared_mse = j.at("shared_mse").get<std::vector<double>>();
        r.ratio = j.at("ratio").get<std::vector<double>>();
        r.naive_mse_mean = j.at("naive_mse_mean").get<double>();
        r.shared_mse_mean = j.at("shared_mse_mean").get<double>();
        r.ratio_overall = j.at("ratio_overall").get<double>();
        return r;
    });
}

json to_json(const LossBreakdown& b) {
    json j{{"d", b.d},
           {"k", b.k},
           {"approximation_error", b.approximation_error},
           {"optimization_error", b.optimization_error},
           {"total_excess", b.total_excess}};
    // -inf (all modes exactly converged) has no JSON number; null marks it
    j["log_optimization_error"] =
        std::isfinite(b.log_optimization_error) ? json(b.log_optimization_error) : json(nullptr);
    return j;
}

json make_document(const std::string& type, json payload, json config, std::uint64_t seed) {
    json doc = std::move(payload);
    doc["schema_version"] = kSchemaVersion;
    doc["type"] = type;
    doc["seed"] = seed;
    doc["config"] = std::move(config);
    return doc;
}

json make_document(const std::string& type, json payload, const FitConfig& config) {
    return make_document(type, std::move(payload), to_json(config), config.seed);
}

json load_document(const std::string& path, std::string& type_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw DataError("cannot parse '" + path + "': " + e.what());
    }
    if (!doc.is_object()) throw DataError("'" + path + "' is not a JSON object");
    return guarded("document", [&] {
        std::string version = doc.at("schema_version").get<std::string>();
        if (version != kSchemaVersion)
            throw DataError("'" + path + "' has unsupported schema_version '" + version + "'");
        type_out = doc.at("type").get<std::string>();
        return doc;
    });
}

void write_atomic(const std::string& path, const std::string& content) {
    std::filesystem::path target(path);
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw DataError("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) throw DataError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

}  // namespace optlaw
