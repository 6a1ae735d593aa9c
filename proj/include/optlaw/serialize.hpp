#pragma once

#include <string>

#include <json.hpp>

#include "optlaw/fitter.hpp"
#include "optlaw/spectral_sim.hpp"
#include "optlaw/validation.hpp"

namespace optlaw {

// All JSON documents carry schema_version, a type tag, the effective
// configuration, and the seed. nlohmann::json orders keys lexicographically
// and prints doubles in shortest round-trip form, which preserves 17
// significant digits.
inline constexpr const char* kSchemaVersion = "1";
inline constexpr const char* kArtifactVersion = "1.0.0";

nlohmann::json to_json(const LawParams& p);
LawParams law_params_from_json(const nlohmann::json& j);

nlohmann::json to_json(const OptimizerFactors& f);
OptimizerFactors factors_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FitConfig& c);

nlohmann::json to_json(const FitResult& r);
FitResult fit_result_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SharedFitResult& r);
SharedFitResult shared_fit_from_json(const nlohmann::json& j);

nlohmann::json to_json(const LooReport& r);
LooReport loo_report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CorrelationReport& r);
CorrelationReport correlation_report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ExtrapolationReport& r);
ExtrapolationReport extrapolation_report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const LossBreakdown& b);

// Wraps a payload as {"schema_version", "type", "seed", "config", <payload>}.
nlohmann::json make_document(const std::string& type, nlohmann::json payload,
                             nlohmann::json config, std::uint64_t seed);
nlohmann::json make_document(const std::string& type, nlohmann::json payload,
                             const FitConfig& config);

// Reads a document, checking schema_version; returns the payload and type.
nlohmann::json load_document(const std::string& path, std::string& type_out);

// Writes via temp file + rename so interrupted runs never leave partial output.
void write_atomic(const std::string& path, const std::string& content);

}  // namespace optlaw
