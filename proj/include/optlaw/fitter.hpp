#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "optlaw/law_models.hpp"
#include "optlaw/run_store.hpp"

namespace optlaw {

struct FitConfig {
    double huber_delta = 1e-3;
    int max_iterations = 500;
    double gradient_tolerance = 1e-10;
    double step_tolerance = 1e-12;
    std::uint64_t seed = 0;

    // Deterministic multistart grid. theta starts iterate in the nest order
    // alpha, beta, A, B, e_frac (innermost last); rho starts are (1,1) plus
    // {0.5, 2} applied to one axis at a time.
    std::vector<double> alpha_starts = {0.2, 0.4, 0.6, 0.9};
    std::vector<double> beta_starts = {0.2, 0.4, 0.6, 0.9};
    std::vector<double> scale_starts = {10.0, 1e3, 1e5};
    std::vector<double> e_fracs = {0.5, 0.9};

    ParamBounds bounds;
};

struct FitResult {
    ModelKind kind = ModelKind::Chinchilla;
    LawParams theta;
    std::optional<OptimizerFactors> factors;
    double objective = 0.0;        // final robust (Huber) objective
    double train_fit_error = 0.0;  // mean squared log residual
    bool converged = false;
    int iterations = 0;
    int start_index = 0;
};

struct SharedOptimizerEntry {
    OptimizerFactors factors;
    double fit_error = 0.0;  // mean squared log residual on that optimizer's points
    // Populated by the shared LOO pipeline; absent otherwise.
    std::optional<double> rho_n_std;
    std::optional<double> rho_second_std;
};

struct SharedFitResult {
    std::string reference_optimizer;
    SecondAxis axis = SecondAxis::Data;
    LawParams theta_ref;
    FitResult reference_fit;
    std::map<std::string, SharedOptimizerEntry> per_optimizer;
};

// Generic box-bounded robust solver: minimizes sum_i huber_delta(r_i(x)) via
// Levenberg-Marquardt on the Huber-reweighted normal equations. Steps are
// projected onto the box; accepted steps never increase the objective.
struct LsqProblem {
    std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> residuals;
    std::function<void(const Eigen::VectorXd&, Eigen::MatrixXd&)> jacobian;
    int residual_count = 0;
};

struct LsqResult {
    Eigen::VectorXd x;
    double objective = 0.0;
    bool converged = false;
    int iterations = 0;
};

LsqResult robust_least_squares(
    const LsqProblem& problem, const Eigen::VectorXd& init,
    const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
    const FitConfig& config,
    const std::function<void(int, double)>& on_accept = nullptr);

// Algorithm 1: independent Chinchilla fit for a single optimizer's points.
// Requires >= 6 points; multistart winner by lowest robust objective, ties
// (within 1e-12) broken by lowest start index.
FitResult fit_per_optimizer(const FitPoints& points, const FitConfig& config);

// Algorithm 3: fit theta on the reference optimizer's points, then hold it
// fixed and fit only (rho_n, rho_second) per other optimizer (2 DOF each).
SharedFitResult fit_shared(const FitPoints& points, const std::string& reference,
                           const FitConfig& config);

// Same procedure on (N, C) axes. points.axis must be Compute.
SharedFitResult fit_compute_form(const FitPoints& points, const std::string& reference,
                                 const FitConfig& config);

// E bounds derived from the fit subset: [0.1*minL, minL].
ParamBounds bounds_for(const FitPoints& points, const FitConfig& config);

}  // namespace optlaw
