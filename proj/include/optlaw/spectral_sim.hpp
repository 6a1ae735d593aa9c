#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "optlaw/run_store.hpp"

namespace optlaw {

// Power-law quadratic problem: lambda_i = gamma_l / i^alpha_spec,
// |<delta, u_i>| = delta_scale / i^(beta_spec/2). gamma_l is the product
// (step size) * (largest eigenvalue); only the product enters any formula,
// and the step size is normalized to 1 internally, so the spectral constant
// appearing in C1, C2, C3 equals gamma_l.
struct SpectrumConfig {
    double alpha_spec = 0.0;
    double beta_spec = 0.0;
    double gamma_l = 0.0;
    double delta_scale = 0.0;
    double l_star = 0.0;
    std::string label = "theory";

    // Throws UsageError unless alpha_spec > 0, beta_spec > 0,
    // alpha_spec + beta_spec > 1, gamma_l in (0, 1], delta_scale > 0,
    // l_star >= 0.
    void validate() const;
};

struct LossBreakdown {
    double approximation_error = 0.0;
    double optimization_error = 0.0;
    double total_excess = 0.0;
    // ln(optimization_error) accumulated in log domain; stays finite far past
    // the point where the linear field underflows (Phase 2 at large k).
    double log_optimization_error = 0.0;
    long long d = 0;
    long long k = 0;
};

enum class Phase { Power, Saturated };

struct AsymptoticPrediction {
    double omega = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double c3 = 0.0;
    Phase phase = Phase::Power;
    double predicted_approx = 0.0;
    double predicted_opt = 0.0;
};

double eigenvalue(const SpectrumConfig& cfg, long long i);
double signal(const SpectrumConfig& cfg, long long i);

// Iterates theta_t = theta_{t-1} - gamma*H*(theta_{t-1} - theta_star)
// coordinate-wise in the eigenbasis from theta_0 = 0 and evaluates the excess
// loss sum. The i > d tail is the same analytic routine closed_form_excess
// uses.
LossBreakdown simulate_gd(const SpectrumConfig& cfg, long long d, long long k);

// optimization_error = (1/2) sum_{i<=d} lambda_i (1-lambda_i)^{2k} delta_i^2,
// approximation_error = (1/2) sum_{i>d} lambda_i delta_i^2 with the infinite
// tail summed to relative tolerance 1e-12 and closed with a midpoint integral
// remainder. Throws NumericalError if the tolerance needs more than the term
// budget.
LossBreakdown closed_form_excess(const SpectrumConfig& cfg, long long d, long long k);

// The tail sum (1/2) sum_{i>d} lambda_i delta_i^2 on its own.
double tail_sum(const SpectrumConfig& cfg, long long d);

// omega = 1 + (beta-1)/alpha; C1 = L*Delta^2/(2(alpha+beta-1));
// C2 = L*Delta^2*Gamma(omega)/(2*alpha*(2*gamma_l)^omega);
// C3 = L*Delta^2/(4*alpha*gamma_l); phase split at k*lambda_d <= 1.
// predicted_opt uses the unified incomplete-Gamma expression
// (L*Delta^2/(2*alpha*(2*gamma_l)^omega)) * Gamma(omega, 2*gamma_l*k*d^-alpha) / k^omega
// so both phases are limits of one formula (+inf at k = 0).
AsymptoticPrediction asymptotic_prediction(const SpectrumConfig& cfg, long long d, long long k);

// Gamma(s, x) to relative error <= 1e-10: power series below x < s+1,
// modified Lentz continued fraction above.
double upper_incomplete_gamma(double s, double x);

// One RunRecord per grid cell: n_params = d, tokens = k*tokens_per_step,
// loss = (l_star + total_excess) * exp(eps), eps ~ N(0, sigma^2) seeded.
// optimizer = cfg.label, arch = "theory". Cells need k >= 1 so tokens stay
// positive.
RunSet generate_theory_runs(const SpectrumConfig& cfg,
                            const std::vector<std::pair<long long, long long>>& grid,
                            long long tokens_per_step, double noise_sigma,
                            std::uint64_t seed);

// rho_D = (B/C_D)^(1/beta) * C2^(-1/omega) from the power-matching argument.
double bridge_rho_from_theory(double b, double beta, double c_d, double c2, double omega);

}  // namespace optlaw
