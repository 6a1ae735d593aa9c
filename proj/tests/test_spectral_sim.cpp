#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "optlaw/errors.hpp"
#include "optlaw/fitter.hpp"
#include "optlaw/spectral_sim.hpp"

using namespace optlaw;

namespace {

SpectrumConfig base_config() {
    SpectrumConfig cfg;
    cfg.alpha_spec = 2.0;
    cfg.beta_spec = 3.0;
    cfg.gamma_l = 0.5;
    cfg.delta_scale = 1.0;
    cfg.l_star = 0.0;
    return cfg;
}

double rel_diff(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

double simpson(const std::function<double(double)>& f, double a, double b) {
    return (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
}

double adaptive(const std::function<double(double)>& f, double a, double b, double eps,
                double whole, int depth) {
    double c = 0.5 * (a + b);
    double left = simpson(f, a, c);
    double right = simpson(f, c, b);
    if (depth <= 0 || std::fabs(left + right - whole) <= 15.0 * eps)
        return left + right + (left + right - whole) / 15.0;
    return adaptive(f, a, c, 0.5 * eps, left, depth - 1) +
           adaptive(f, c, b, 0.5 * eps, right, depth - 1);
}

// quadrature of the defining integral over [x, cutoff]; needs x > 0 or s >= 1
double quad_upper_gamma(double s, double x) {
    auto f = [s](double t) { return std::pow(t, s - 1.0) * std::exp(-t); };
    double hi = x + 60.0 + 10.0 * s;
    double rough = simpson(f, x, hi);
    double eps = std::max(1e-300, 1e-13 * std::fabs(rough));
    return adaptive(f, x, hi, eps, rough, 40);
}

}  // namespace

TEST_CASE("spectrum definitions") {
    SpectrumConfig cfg = base_config();
    CHECK(eigenvalue(cfg, 1) == cfg.gamma_l);
    CHECK(eigenvalue(cfg, 10) < eigenvalue(cfg, 9));
    CHECK(signal(cfg, 4) == doctest::Approx(cfg.delta_scale / std::pow(4.0, cfg.beta_spec / 2.0))
                                .epsilon(1e-15));
    CHECK_THROWS_AS(eigenvalue(cfg, 0), UsageError);
    CHECK_THROWS_AS(signal(cfg, 0), UsageError);
}

TEST_CASE("config validation") {
    SpectrumConfig cfg = base_config();
    CHECK_NOTHROW(cfg.validate());

    SpectrumConfig thin = cfg;
    thin.alpha_spec = 0.3;
    thin.beta_spec = 0.5;
    CHECK_THROWS_AS(thin.validate(), UsageError);

    SpectrumConfig hot = cfg;
    hot.gamma_l = 1.5;
    CHECK_THROWS_AS(hot.validate(), UsageError);
    hot.gamma_l = 0.0;
    CHECK_THROWS_AS(hot.validate(), UsageError);

    SpectrumConfig flat = cfg;
    flat.delta_scale = 0.0;
    CHECK_THROWS_AS(flat.validate(), UsageError);

    SpectrumConfig neg = cfg;
    neg.l_star = -0.1;
    CHECK_THROWS_AS(neg.validate(), UsageError);
}

TEST_CASE("no steps leaves the full initial excess") {
    SpectrumConfig cfg = base_config();
    // (gamma_l * Delta^2 / 2) * zeta(5), high-precision reference
    double initial = 0.25923193878584248;
    for (long long d : {1LL, 7LL, 100LL}) {
        auto bd = closed_form_excess(cfg, d, 0);
        CHECK(bd.total_excess == bd.approximation_error + bd.optimization_error);
        CHECK(rel_diff(bd.total_excess, initial) <= 1e-11);
    }
}

TEST_CASE("single mode closed form") {
    SpectrumConfig cfg = base_config();
    auto bd = closed_form_excess(cfg, 1, 1);
    double lam = eigenvalue(cfg, 1);
    double expected = 0.5 * lam * (1.0 - lam) * (1.0 - lam) * cfg.delta_scale * cfg.delta_scale;
    CHECK(bd.optimization_error == doctest::Approx(expected).epsilon(1e-12));
    CHECK(bd.approximation_error == doctest::Approx(tail_sum(cfg, 1)).epsilon(1e-12));
}

TEST_CASE("iterated dynamics agree with the closed form") {
    SpectrumConfig cfg = base_config();
    for (long long d : {1LL, 10LL, 100LL})
        for (long long k : {0LL, 1LL, 10LL, 1000LL}) {
            auto sim = simulate_gd(cfg, d, k);
            auto cf = closed_form_excess(cfg, d, k);
            CHECK(sim.total_excess == sim.approximation_error + sim.optimization_error);
            CHECK(cf.total_excess == cf.approximation_error + cf.optimization_error);
            CHECK(rel_diff(sim.approximation_error, cf.approximation_error) <= 1e-10);
            CHECK(rel_diff(sim.total_excess, cf.total_excess) <= 1e-10);
            if (cf.optimization_error > 0.0)
                CHECK(rel_diff(sim.optimization_error, cf.optimization_error) <= 1e-10);
        }
}

TEST_CASE("error terms are monotone in steps and width") {
    SpectrumConfig cfg = base_config();
    double prev = closed_form_excess(cfg, 50, 0).optimization_error;
    for (long long k : {1LL, 2LL, 5LL, 10LL, 50LL, 100LL, 1000LL, 10000LL}) {
        double cur = closed_form_excess(cfg, 50, k).optimization_error;
        CHECK(cur <= prev);
        prev = cur;
    }
    prev = closed_form_excess(cfg, 1, 3).approximation_error;
    for (long long d : {2LL, 5LL, 10LL, 100LL, 1000LL, 10000LL}) {
        double cur = closed_form_excess(cfg, d, 3).approximation_error;
        CHECK(cur <= prev);
        prev = cur;
    }
}

TEST_CASE("approximation error vanishes with width") {
    SpectrumConfig cfg = base_config();
    double wide = closed_form_excess(cfg, 1000000, 0).approximation_error;
    double narrow = closed_form_excess(cfg, 10, 0).approximation_error;
    CHECK(wide <= 1e-3 * narrow);
}

TEST_CASE("tail sums match high-precision references") {
    SpectrumConfig cfg = base_config();
    CHECK(rel_diff(tail_sum(cfg, 10), 5.1034496691175691e-6) <= 1e-11);

    SpectrumConfig other;
    other.alpha_spec = 1.2;
    other.beta_spec = 1.15;
    other.gamma_l = 1.0;
    other.delta_scale = 3.0;
    other.l_star = 1.0;
    CHECK(rel_diff(tail_sum(other, 1000), 0.0002968831931249719) <= 1e-11);
}

TEST_CASE("derived constants") {
    SpectrumConfig cfg = base_config();
    auto ap = asymptotic_prediction(cfg, 1000, 10000);
    CHECK(ap.omega == 2.0);
    // spectral constant L = gamma_l under the unit-step normalization
    CHECK(ap.c1 == doctest::Approx(0.0625).epsilon(1e-15));
    CHECK(ap.c2 == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(ap.c3 == doctest::Approx(0.125).epsilon(1e-15));
}

TEST_CASE("approximation error follows its asymptote") {
    SpectrumConfig cfg = base_config();
    auto bd = closed_form_excess(cfg, 10000, 0);
    auto ap = asymptotic_prediction(cfg, 10000, 0);
    double ratio = bd.approximation_error / ap.predicted_approx;
    CHECK(ratio >= 0.99);
    CHECK(ratio <= 1.01);
}

TEST_CASE("phase classification") {
    SpectrumConfig cfg = base_config();
    CHECK(asymptotic_prediction(cfg, 1000, 10000).phase == Phase::Power);
    CHECK(asymptotic_prediction(cfg, 10, 10000).phase == Phase::Saturated);
    auto rest = asymptotic_prediction(cfg, 10, 0);
    CHECK(rest.phase == Phase::Power);
    CHECK(std::isinf(rest.predicted_opt));
}

TEST_CASE("power phase matches the incomplete-gamma prediction") {
    SpectrumConfig cfg = base_config();
    auto bd = closed_form_excess(cfg, 1000, 10000);
    auto ap = asymptotic_prediction(cfg, 1000, 10000);
    double ratio = bd.optimization_error / ap.predicted_opt;
    CHECK(ratio >= 0.95);
    CHECK(ratio <= 1.05);
}

TEST_CASE("saturated phase matches the exponential decay in log units") {
    SpectrumConfig cfg = base_config();
    double lam_d = eigenvalue(cfg, 10);
    double log_c3 = std::log(asymptotic_prediction(cfg, 10, 10000).c3);
    for (long long k : {10000LL, 30000LL, 100000LL}) {
        auto bd = closed_form_excess(cfg, 10, k);
        double predicted = log_c3 - 2.0 * k * lam_d -
                           std::log(std::pow(10.0, cfg.beta_spec - 1.0) * static_cast<double>(k));
        CHECK(std::fabs(bd.log_optimization_error - predicted) /
                  std::fabs(bd.log_optimization_error) <=
              0.05);
    }

    // the log field stays finite after the linear value underflows
    auto deep = closed_form_excess(cfg, 10, 100000);
    CHECK(deep.optimization_error == 0.0);
    CHECK(std::isfinite(deep.log_optimization_error));

    auto shallow = closed_form_excess(cfg, 10, 100);
    CHECK(std::fabs(shallow.log_optimization_error - std::log(shallow.optimization_error)) <= 1e-10);
}

TEST_CASE("wide-problem slope equals the predicted exponent") {
    SpectrumConfig cfg = base_config();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (long long k : {100LL, 316LL, 1000LL, 3162LL, 10000LL}) {
        auto bd = closed_form_excess(cfg, 1000000, k);
        double x = std::log(static_cast<double>(k));
        double y = bd.log_optimization_error;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    CHECK(std::fabs(slope + 2.0) <= 0.03);
}

TEST_CASE("incomplete gamma against quadrature and references") {
    for (double x : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0})
        CHECK(rel_diff(upper_incomplete_gamma(1.0, x), std::exp(-x)) <= 1e-12);
    CHECK(upper_incomplete_gamma(2.0, 0.0) == doctest::Approx(1.0).epsilon(1e-13));

    CHECK(rel_diff(upper_incomplete_gamma(0.5, 0.0), 1.772453850905516) <= 1e-11);
    CHECK(rel_diff(upper_incomplete_gamma(1.5, 1.0), 0.50728223381177331) <= 1e-11);
    CHECK(rel_diff(upper_incomplete_gamma(3.7, 10.0), 0.030012961119453536) <= 1e-11);

    for (double s : {0.5, 1.0, 1.5, 2.0, 3.7})
        for (double x : {0.0, 0.1, 1.0, 10.0, 50.0}) {
            double got = upper_incomplete_gamma(s, x);
            if (x == 0.0) {
                CHECK(rel_diff(got, std::tgamma(s)) <= 1e-10);
            } else {
                CHECK(rel_diff(got, quad_upper_gamma(s, x)) <= 1e-9);
            }
        }
}

TEST_CASE("theory runs carry the exact breakdown") {
    SpectrumConfig cfg = base_config();
    cfg.l_star = 1.0;
    cfg.label = "gd";
    std::vector<std::pair<long long, long long>> grid = {{10, 5}, {100, 50}, {1000, 500}};
    auto rs = generate_theory_runs(cfg, grid, 4, 0.0, 7);
    REQUIRE(rs.records.size() == grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& r = rs.records[i];
        CHECK(r.optimizer == "gd");
        CHECK(r.arch == "theory");
        CHECK(r.n_params == grid[i].first);
        CHECK(r.tokens == grid[i].second * 4);
        CHECK_FALSE(r.compute.has_value());
        CHECK(r.loss == cfg.l_star + closed_form_excess(cfg, grid[i].first, grid[i].second).total_excess);
    }

    auto again = generate_theory_runs(cfg, grid, 4, 0.0, 7);
    CHECK(rs.records == again.records);

    auto noisy1 = generate_theory_runs(cfg, grid, 4, 0.01, 7);
    auto noisy2 = generate_theory_runs(cfg, grid, 4, 0.01, 7);
    auto noisy3 = generate_theory_runs(cfg, grid, 4, 0.01, 8);
    CHECK(noisy1.records == noisy2.records);
    CHECK(noisy1.records != noisy3.records);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double clean = rs.records[i].loss;
        CHECK(std::fabs(std::log(noisy1.records[i].loss / clean)) <= 6.0 * 0.01);
    }
}

TEST_CASE("theory run validation") {
    SpectrumConfig cfg = base_config();
    CHECK_THROWS_AS(generate_theory_runs(cfg, {}, 1, 0.0, 1), UsageError);
    CHECK_THROWS_AS(generate_theory_runs(cfg, {{10, 0}}, 1, 0.0, 1), UsageError);
    CHECK_THROWS_AS(generate_theory_runs(cfg, {{10, 5}, {10, 5}}, 1, 0.0, 1), UsageError);
    CHECK_THROWS_AS(generate_theory_runs(cfg, {{10, 5}}, 0, 0.0, 1), UsageError);
    CHECK_THROWS_AS(generate_theory_runs(cfg, {{10, 5}}, 1, -0.1, 1), UsageError);
}

TEST_CASE("power-phase runs recover the exponent correspondence") {
    SpectrumConfig cfg;
    cfg.alpha_spec = 1.2;
    cfg.beta_spec = 1.15;
    cfg.gamma_l = 1.0;
    cfg.delta_scale = 3.0;
    cfg.l_star = 1.0;
    cfg.label = "gd";

    std::vector<std::pair<long long, long long>> grid;
    for (long long k : {100LL, 316LL, 1000LL, 3162LL, 10000LL}) grid.push_back({1000000, k});
    for (long long d : {1000LL, 3000LL, 10000LL, 30000LL, 100000LL})
        grid.push_back({d, std::llround(0.2 * std::pow(static_cast<double>(d), cfg.alpha_spec))});

    auto rs = generate_theory_runs(cfg, grid, 1, 0.0, 1);
    auto fit = fit_per_optimizer(to_log_points(rs, SecondAxis::Data), FitConfig{});
    double alpha_target = cfg.alpha_spec + cfg.beta_spec - 1.0;
    double beta_target = 1.0 + (cfg.beta_spec - 1.0) / cfg.alpha_spec;
    CHECK(std::fabs(fit.theta.alpha - alpha_target) <= 0.05);
    CHECK(std::fabs(fit.theta.beta - beta_target) <= 0.05);
}

TEST_CASE("factor bridge") {
    CHECK(bridge_rho_from_theory(110.0, 0.27, 110.0, 1.0, 2.0) == 1.0);
    CHECK(rel_diff(bridge_rho_from_theory(110.0, 0.27, 75.0, 2.0, 1.0),
                   0.5 * bridge_rho_from_theory(110.0, 0.27, 75.0, 1.0, 1.0)) <= 1e-12);

    struct Case {
        double b, beta, c_d, c2, omega;
    };
    for (const auto& c : {Case{110.0, 0.27, 75.0, 0.125, 2.0}, Case{1084.0, 0.38, 500.0, 3.7, 1.3}})
        for (double big_d : {1e3, 1e6}) {
            double rho = bridge_rho_from_theory(c.b, c.beta, c.c_d, c.c2, c.omega);
            double lhs = c.b * std::pow(big_d * rho, -c.beta);
            double rhs = c.c_d * std::pow(c.c2 / std::pow(big_d, c.omega), c.beta / c.omega);
            CHECK(rel_diff(lhs, rhs) <= 1e-10);
        }
}
