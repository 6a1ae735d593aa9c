#include "optlaw/law_models.hpp"

#include <cmath>

#include "optlaw/errors.hpp"

namespace optlaw {

namespace {

struct Terms {
    double t1;  // A * (rho_n * N)^-alpha
    double t2;  // B * (rho * X)^-beta
    double total;
};

// log-argument form; the products keep SharedRho(N, D, rho) identical bit for
// bit to Chinchilla(rho_n*N, rho_second*D)
Terms terms(const LawParams& th, double rho_n, double rho_second, double n, double second) {
    Terms t;
    t.t1 = th.a * std::exp(-th.alpha * std::log(rho_n * n));
    t.t2 = th.b * std::exp(-th.beta * std::log(rho_second * second));
    t.total = t.t1 + t.t2 + th.e;
    return t;
}

void check_kind_inputs(ModelKind kind, const std::optional<OptimizerFactors>& factors,
                       const std::optional<DataEfficiencyParams>& de) {
    bool needs_factors = kind == ModelKind::SharedRho || kind == ModelKind::ComputeRho;
    if (needs_factors && !factors)
        throw UsageError("SharedRho/ComputeRho evaluation requires optimizer factors");
    if (kind == ModelKind::DataEfficiency && !de)
        throw UsageError("DataEfficiency evaluation requires its parameter set");
}

}  // namespace

double eval_chinchilla(const LawParams& theta, double n, double second) {
    return terms(theta, 1.0, 1.0, n, second).total;
}

double eval_shared(const LawParams& theta, const OptimizerFactors& f, double n, double second) {
    return terms(theta, f.rho_n, f.rho_second, n, second).total;
}

double eval_data_efficiency(const DataEfficiencyParams& p, double d) {
    return p.b * std::exp(-p.beta * std::log(d / p.s_opt)) + p.e;
}

double eval_law(ModelKind kind, const LawParams& theta,
                const std::optional<OptimizerFactors>& factors,
                const std::optional<DataEfficiencyParams>& de,
                double n, double second) {
    check_kind_inputs(kind, factors, de);
    switch (kind) {
        case ModelKind::Chinchilla:
            return eval_chinchilla(theta, n, second);
        case ModelKind::SharedRho:
        case ModelKind::ComputeRho:
            return eval_shared(theta, *factors, n, second);
        case ModelKind::DataEfficiency:
            return eval_data_efficiency(*de, second);
    }
    throw UsageError("unknown model kind");
}

std::vector<double> log_residuals(ModelKind kind, const LawParams& theta,
                                  const std::optional<OptimizerFactors>& factors,
                                  const std::optional<DataEfficiencyParams>& de,
                                  const FitPoints& points) {
    check_kind_inputs(kind, factors, de);
    std::vector<double> r(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        double n = std::exp(points.log_n[i]);
        double second = std::exp(points.log_d[i]);
        r[i] = points.log_loss[i] - std::log(eval_law(kind, theta, factors, de, n, second));
    }
    return r;
}

std::vector<double> analytic_gradient(ModelKind kind, const LawParams& theta,
                                      const std::optional<OptimizerFactors>& factors,
                                      const std::optional<DataEfficiencyParams>& de,
                                      double n, double second) {
    check_kind_inputs(kind, factors, de);
    switch (kind) {
        case ModelKind::Chinchilla: {
            Terms t = terms(theta, 1.0, 1.0, n, second);
            return {t.t1 / (theta.a * t.total),
                    -t.t1 * std::log(n) / t.total,
                    t.t2 / (theta.b * t.total),
                    -t.t2 * std::log(second) / t.total,
                    1.0 / t.total};
        }
        case ModelKind::SharedRho:
        case ModelKind::ComputeRho: {
            const OptimizerFactors& f = *factors;
            Terms t = terms(theta, f.rho_n, f.rho_second, n, second);
            return {-theta.alpha * t.t1 / (f.rho_n * t.total),
                    -theta.beta * t.t2 / (f.rho_second * t.total)};
        }
        case ModelKind::DataEfficiency: {
            const DataEfficiencyParams& p = *de;
            double t2 = p.b * std::exp(-p.beta * std::log(second / p.s_opt));
            double total = t2 + p.e;
            return {t2 / (p.b * total),
                    -t2 * std::log(second / p.s_opt) / total,
                    1.0 / total,
                    p.beta * t2 / (p.s_opt * total)};
        }
    }
    throw UsageError("unknown model kind");
}

}  // namespace optlaw
