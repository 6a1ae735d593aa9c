#pragma once

#include <optional>
#include <vector>

#include "optlaw/run_store.hpp"

namespace optlaw {

// Shared Chinchilla parameters theta = (A, alpha, B, beta, E).
struct LawParams {
    double a = 0.0;
    double alpha = 0.0;
    double b = 0.0;
    double beta = 0.0;
    double e = 0.0;
};

// Per-optimizer rescalings. axis selects whether rho_second is rho_D or rho_C.
// The reference optimizer always has rho_n = rho_second = 1 exactly.
struct OptimizerFactors {
    double rho_n = 1.0;
    double rho_second = 1.0;
    SecondAxis axis = SecondAxis::Data;
};

// Data-efficiency form L = B*(D/s_opt)^-beta + E. No A/N^alpha term; the form
// is implemented as printed and kept for comparison only (its data speedup
// necessarily fades as model size grows, which is the documented limitation).
struct DataEfficiencyParams {
    double b = 0.0;
    double beta = 0.0;
    double e = 0.0;
    double s_opt = 1.0;
};

enum class ModelKind { Chinchilla, SharedRho, ComputeRho, DataEfficiency };

// Fitting box bounds. E bounds depend on the observed losses and are filled
// in by the fitter per dataset: E in [0.1*minL, minL].
struct ParamBounds {
    double alpha_lo = 0.01, alpha_hi = 1.5;
    double beta_lo = 0.01, beta_hi = 1.5;
    double scale_lo = 1e-3, scale_hi = 1e9;  // A and B
    double e_lo = 0.0, e_hi = 0.0;
    double rho_lo = 0.1, rho_hi = 10.0;
};

// L = A*(rho_N*N)^-alpha + B*(rho*X)^-beta + E, evaluated via
// A*exp(-alpha*ln(rho_N*N)) so N ~ 1e9 cannot overflow a pow.
double eval_chinchilla(const LawParams& theta, double n, double second);
double eval_shared(const LawParams& theta, const OptimizerFactors& f, double n, double second);
double eval_data_efficiency(const DataEfficiencyParams& p, double d);

// Dispatcher enforcing "factors present iff the kind requires them".
double eval_law(ModelKind kind, const LawParams& theta,
                const std::optional<OptimizerFactors>& factors,
                const std::optional<DataEfficiencyParams>& de,
                double n, double second);

// Component i = observed log loss - predicted log loss.
std::vector<double> log_residuals(ModelKind kind, const LawParams& theta,
                                  const std::optional<OptimizerFactors>& factors,
                                  const std::optional<DataEfficiencyParams>& de,
                                  const FitPoints& points);

// Partial derivatives of ln(L_hat) with respect to the kind's free parameters,
// in raw parameter space:
//   Chinchilla:             (A, alpha, B, beta, E)
//   SharedRho/ComputeRho:   (rho_n, rho_second), theta held fixed
//   DataEfficiency:         (B, beta, E, s_opt)
std::vector<double> analytic_gradient(ModelKind kind, const LawParams& theta,
                                      const std::optional<OptimizerFactors>& factors,
                                      const std::optional<DataEfficiencyParams>& de,
                                      double n, double second);

}  // namespace optlaw
