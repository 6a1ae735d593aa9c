#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "optlaw/fitter.hpp"
#include "optlaw/run_store.hpp"

namespace optlaw {

struct LooReport {
    std::vector<std::string> param_names;
    std::vector<double> full_fit;                // all-points fit
    std::vector<double> mean;                    // per parameter, over folds
    std::vector<double> stddev;                  // sqrt((1/m) sum (mean - theta^(-i))^2)
    std::vector<std::vector<double>> samples;    // samples[fold][param]
    std::vector<double> held_out_error;          // squared log-loss error per fold
    double test_fit_error = 0.0;                 // mean of held_out_error
    std::string optimizer;                       // label, or "shared" pipeline tag
};

struct CorrelationReport {
    double anchor_n = 0.0;
    double anchor_d = 0.0;
    std::optional<double> corr_ln_a_alpha;   // absent when a sample is degenerate
    std::optional<double> corr_ln_b_beta;
    std::vector<double> a_over_nc;           // A_j / N_c^alpha_j per LOO sample
    std::vector<double> b_over_dc;           // B_j / D_c^beta_j
    std::optional<double> cv_a_over_nc;      // coefficient of variation
    std::optional<double> cv_b_over_dc;
    std::optional<double> cv_a;              // CV of raw A_j, the degeneracy baseline
    std::optional<double> cv_b;
};

struct ExtrapolationReport {
    long long threshold_n = 0;
    std::string reference;
    std::vector<std::string> optimizers;
    std::vector<double> naive_mse;    // per optimizer, held-out squared log-loss
    std::vector<double> shared_mse;
    std::vector<double> ratio;        // naive/shared per optimizer
    double naive_mse_mean = 0.0;      // equal-weight mean over optimizers
    double shared_mse_mean = 0.0;
    double ratio_overall = 0.0;       // naive_mse_mean / shared_mse_mean
};

// A fold-fittable procedure: fit returns the tracked parameter vector,
// predict_log_loss evaluates the fold's model at a held-out row.
struct LooProcedure {
    std::vector<std::string> param_names;
    std::string label;
    std::function<std::vector<double>(const FitPoints&)> fit;
    std::function<double(const std::vector<double>&, double log_n, double log_d,
                         const std::string& optimizer)> predict_log_loss;
};

// Algorithm 2: m refits each excluding one point. Requires m >= 7. stddev is
// the population formula centered on the fold mean.
LooReport loocv(const FitPoints& points, const LooProcedure& procedure,
                const FitConfig& config);

// LooProcedure for an independent Chinchilla fit (one optimizer's points).
LooProcedure chinchilla_procedure(const FitConfig& config);

// LooProcedure re-running the full reference-anchored pipeline per fold over
// the union of all optimizers' points. Tracked vector: theta_ref (5 params)
// then (rho_n, rho_second) per non-reference optimizer in label order. The
// full point set fixes the parameter names up front and must give the
// reference >= 7 points and every other optimizer >= 3, so each fold keeps
// enough for its fit.
LooProcedure shared_procedure(const FitPoints& all_points, const std::string& reference,
                              const FitConfig& config);

// Default anchors: geometric mean of the observed N range and D range.
std::pair<double, double> default_anchors(const FitPoints& points);

// Pearson correlations of (ln A, alpha) and (ln B, beta) plus the constancy
// statistics of A/N_c^alpha and B/D_c^beta across LOO samples. Requires >= 3
// samples and a Chinchilla-shaped report.
CorrelationReport correlation_diagnostics(const LooReport& report,
                                          std::pair<double, double> anchors);

// Fig. 3 protocol: fit both law families on records with n_params below
// threshold_n, evaluate squared log-loss on the rest. Requires >= 1 record at
// or above and >= 6 below the threshold per optimizer.
ExtrapolationReport extrapolation_eval(const RunSet& runs, long long threshold_n,
                                       const std::string& reference,
                                       const FitConfig& config);

}  // namespace optlaw
