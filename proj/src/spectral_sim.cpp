#include "optlaw/spectral_sim.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "optlaw/errors.hpp"
#include "optlaw/noise.hpp"

namespace optlaw {

namespace {

constexpr double kTailTol = 1e-12;
constexpr long long kTailTermBudget = 50'000'000;

void check_dk(long long d, long long k) {
    if (d < 1) throw UsageError("truncation width d must be at least 1");
    if (k < 0) throw UsageError("step count k must be nonnegative");
}

// ln of (1/2) lambda_i delta_i^2 (1 - lambda_i)^(2k); -inf when the mode is
// exactly converged (lambda = 1, k >= 1).
double log_term(const SpectrumConfig& cfg, long long i, long long k) {
    double lam = cfg.gamma_l * std::pow(static_cast<double>(i), -cfg.alpha_spec);
    double de2 = cfg.delta_scale * cfg.delta_scale *
                 std::pow(static_cast<double>(i), -cfg.beta_spec);
    double base = std::log(0.5 * lam * de2);
    if (k == 0) return base;
    if (lam >= 1.0) return -std::numeric_limits<double>::infinity();
    return base + 2.0 * static_cast<double>(k) * std::log1p(-lam);
}

}  // namespace

void SpectrumConfig::validate() const {
    if (!(alpha_spec > 0.0)) throw UsageError("alpha_spec must be positive");
    if (!(beta_spec > 0.0)) throw UsageError("beta_spec must be positive");
    if (!(alpha_spec + beta_spec > 1.0))
        throw UsageError("alpha_spec + beta_spec must exceed 1 for a finite initial loss");
    if (!(gamma_l > 0.0) || gamma_l > 1.0) throw UsageError("gamma_l must lie in (0, 1]");
    if (!(delta_scale > 0.0)) throw UsageError("delta_scale must be positive");
    if (l_star < 0.0) throw UsageError("l_star must be nonnegative");
}

double eigenvalue(const SpectrumConfig& cfg, long long i) {
    if (i < 1) throw UsageError("mode index must be at least 1");
    return cfg.gamma_l * std::pow(static_cast<double>(i), -cfg.alpha_spec);
}

double signal(const SpectrumConfig& cfg, long long i) {
    if (i < 1) throw UsageError("mode index must be at least 1");
    return cfg.delta_scale * std::pow(static_cast<double>(i), -0.5 * cfg.beta_spec);
}

double tail_sum(const SpectrumConfig& cfg, long long d) {
    cfg.validate();
    if (d < 1) throw UsageError("truncation width d must be at least 1");
    const double s = cfg.alpha_spec + cfg.beta_spec;
    const double c = 0.5 * cfg.gamma_l * cfg.delta_scale * cfg.delta_scale;
    double partial = 0.0;
    long long m = d;
    while (true) {
        ++m;
        double f = c * std::pow(static_cast<double>(m), -s);
        partial += f;
        // midpoint closure error bound (s/24) |f'(m)| <= (s/24) f(m)/m for the
        // convex decreasing tail
        double err_bound = (s / 24.0) * f / static_cast<double>(m);
        if (err_bound <= kTailTol * partial) break;
        if (m - d > kTailTermBudget)
            throw NumericalError(
                "tail summation exceeded the term budget before reaching tolerance "
                "(alpha_spec + beta_spec too close to 1)");
    }
    double remainder = c * std::pow(static_cast<double>(m) + 0.5, 1.0 - s) / (s - 1.0);
    return partial + remainder;
}

LossBreakdown closed_form_excess(const SpectrumConfig& cfg, long long d, long long k) {
    cfg.validate();
    check_dk(d, k);
    LossBreakdown out;
    out.d = d;
    out.k = k;

    // linear sum and streaming log-sum-exp over the same terms
    double lin = 0.0;
    double max_log = -std::numeric_limits<double>::infinity();
    double scaled = 0.0;
    for (long long i = 1; i <= d; ++i) {
        double t = log_term(cfg, i, k);
        if (t == -std::numeric_limits<double>::infinity()) continue;
        lin += std::exp(t);
        if (t > max_log) {
            scaled = scaled * std::exp(max_log - t) + 1.0;
            max_log = t;
        } else {
            scaled += std::exp(t - max_log);
        }
    }
    out.optimization_error = lin;
    out.log_optimization_error =
        scaled > 0.0 ? max_log + std::log(scaled) : -std::numeric_limits<double>::infinity();
    out.approximation_error = tail_sum(cfg, d);
    out.total_excess = out.approximation_error + out.optimization_error;
    return out;
}

LossBreakdown simulate_gd(const SpectrumConfig& cfg, long long d, long long k) {
    cfg.validate();
    check_dk(d, k);
    LossBreakdown out;
    out.d = d;
    out.k = k;

    double opt = 0.0;
    for (long long i = 1; i <= d; ++i) {
        double lam = eigenvalue(cfg, i);
        double e = signal(cfg, i);  // eigencoordinate of theta_0 - theta_star, sign irrelevant
        double factor = 1.0 - lam;
        for (long long t = 0; t < k; ++t) {
            e *= factor;
            if (e == 0.0) break;
        }
        opt += 0.5 * lam * e * e;
    }
    out.optimization_error = opt;
    out.log_optimization_error =
        opt > 0.0 ? std::log(opt) : -std::numeric_limits<double>::infinity();
    out.approximation_error = tail_sum(cfg, d);
    out.total_excess = out.approximation_error + out.optimization_error;
    return out;
}

AsymptoticPrediction asymptotic_prediction(const SpectrumConfig& cfg, long long d, long long k) {
    cfg.validate();
    check_dk(d, k);
    const double a = cfg.alpha_spec;
    const double b = cfg.beta_spec;
    const double L = cfg.gamma_l;  // spectral constant under the step size normalization
    const double d2 = cfg.delta_scale * cfg.delta_scale;

    AsymptoticPrediction out;
    out.omega = 1.0 + (b - 1.0) / a;
    out.c1 = L * d2 / (2.0 * (a + b - 1.0));
    out.c2 = L * d2 * std::tgamma(out.omega) / (2.0 * a * std::pow(2.0 * cfg.gamma_l, out.omega));
    out.c3 = L * d2 / (4.0 * a * cfg.gamma_l);

    double lam_d = eigenvalue(cfg, d);
    out.phase = static_cast<double>(k) * lam_d <= 1.0 ? Phase::Power : Phase::Saturated;
    out.predicted_approx = out.c1 * std::pow(static_cast<double>(d), -(a + b - 1.0));
    if (k == 0) {
        out.predicted_opt = std::numeric_limits<double>::infinity();
    } else {
        double pref = L * d2 / (2.0 * a * std::pow(2.0 * cfg.gamma_l, out.omega));
        double x = 2.0 * cfg.gamma_l * static_cast<double>(k) *
                   std::pow(static_cast<double>(d), -a);
        out.predicted_opt = pref * upper_incomplete_gamma(out.omega, x) /
                            std::pow(static_cast<double>(k), out.omega);
    }
    return out;
}

double upper_incomplete_gamma(double s, double x) {
    if (!(s > 0.0)) throw UsageError("upper_incomplete_gamma needs s > 0");
    if (x < 0.0) throw UsageError("upper_incomplete_gamma needs x >= 0");
    if (x == 0.0) return std::tgamma(s);

    if (x < s + 1.0) {
        // lower series gamma(s,x) = x^s e^-x sum x^n / (s (s+1) ... (s+n))
        double term = 1.0 / s;
        double sum = term;
        for (int n = 1; n <= 500; ++n) {
            term *= x / (s + static_cast<double>(n));
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-16)
                return std::tgamma(s) - std::exp(s * std::log(x) - x) * sum;
        }
        throw NumericalError("incomplete gamma series failed to converge");
    }

    // modified Lentz continued fraction for the upper function
    const double fpmin = 1e-300;
    double b = x + 1.0 - s;
    double c = 1.0 / fpmin;
    double den = 1.0 / b;
    double h = den;
    for (int i = 1; i <= 500; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - s);
        b += 2.0;
        den = an * den + b;
        if (std::abs(den) < fpmin) den = fpmin;
        c = b + an / c;
        if (std::abs(c) < fpmin) c = fpmin;
        den = 1.0 / den;
        double delta = den * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-15)
            return std::exp(s * std::log(x) - x) * h;
    }
    throw NumericalError("incomplete gamma continued fraction failed to converge");
}

RunSet generate_theory_runs(const SpectrumConfig& cfg,
                            const std::vector<std::pair<long long, long long>>& grid,
                            long long tokens_per_step, double noise_sigma,
                            std::uint64_t seed) {
    cfg.validate();
    if (grid.empty()) throw UsageError("grid must be nonempty");
    if (tokens_per_step < 1) throw UsageError("tokens_per_step must be positive");
    if (noise_sigma < 0.0) throw UsageError("noise_sigma must be nonnegative");

    std::set<std::pair<long long, long long>> seen;
    GaussianNoise noise(seed);
    RunSet rs;
    rs.provenance = "spectral simulator, label " + cfg.label;
    for (auto [d, k] : grid) {
        check_dk(d, k);
        if (k < 1)
            throw UsageError("grid cell with k = 0 cannot become a run record (tokens > 0)");
        if (!seen.insert({d, k}).second)
            throw UsageError("duplicate grid cell (d=" + std::to_string(d) +
                             ", k=" + std::to_string(k) + ")");
        LossBreakdown br = closed_form_excess(cfg, d, k);
        double loss = cfg.l_star + br.total_excess;
        if (noise_sigma > 0.0) loss *= std::exp(noise_sigma * noise());
        RunRecord rec;
        rec.optimizer = cfg.label;
        rec.arch = "theory";
        rec.n_params = d;
        rec.tokens = k * tokens_per_step;
        rec.loss = loss;
        rs.records.push_back(std::move(rec));
    }
    return rs;
}

double bridge_rho_from_theory(double b, double beta, double c_d, double c2, double omega) {
    if (!(b > 0.0) || !(beta > 0.0) || !(c_d > 0.0) || !(c2 > 0.0) || !(omega > 0.0))
        throw UsageError("bridge_rho_from_theory needs all inputs positive");
    return std::pow(b / c_d, 1.0 / beta) * std::pow(c2, -1.0 / omega);
}

}  // namespace optlaw
