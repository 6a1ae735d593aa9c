#include <doctest.h>

#include <cmath>
#include <vector>

#include "optlaw/errors.hpp"
#include "optlaw/fitter.hpp"
#include "optlaw/law_models.hpp"

using namespace optlaw;

namespace {

const std::vector<double> kSizes = {5e7, 1.4e8, 2.5e8, 5e8, 1.5e9};
const std::vector<double> kRatios = {30.0, 50.0, 100.0, 200.0};

FitPoints grid_points(const LawParams& th, const std::string& label,
                      double n_scale = 1.0, double d_scale = 1.0) {
    FitPoints pts;
    pts.axis = SecondAxis::Data;
    for (double n : kSizes)
        for (double r : kRatios) {
            double d = n * r;
            pts.log_n.push_back(std::log(n));
            pts.log_d.push_back(std::log(d));
            pts.log_loss.push_back(std::log(eval_chinchilla(th, n_scale * n, d_scale * d)));
            pts.optimizer.push_back(label);
        }
    return pts;
}

void append(FitPoints& dst, const FitPoints& src) {
    dst.log_n.insert(dst.log_n.end(), src.log_n.begin(), src.log_n.end());
    dst.log_d.insert(dst.log_d.end(), src.log_d.begin(), src.log_d.end());
    dst.log_loss.insert(dst.log_loss.end(), src.log_loss.begin(), src.log_loss.end());
    dst.optimizer.insert(dst.optimizer.end(), src.optimizer.begin(), src.optimizer.end());
}

LsqProblem scalar_problem(const std::function<double(double)>& r,
                          const std::function<double(double)>& dr) {
    LsqProblem p;
    p.residual_count = 1;
    p.residuals = [r](const Eigen::VectorXd& x, Eigen::VectorXd& out) { out(0) = r(x(0)); };
    p.jacobian = [dr](const Eigen::VectorXd& x, Eigen::MatrixXd& J) { J(0, 0) = dr(x(0)); };
    return p;
}

Eigen::VectorXd vec1(double v) {
    Eigen::VectorXd x(1);
    x << v;
    return x;
}

}  // namespace

TEST_CASE("linear residual solves exactly") {
    FitConfig cfg;
    cfg.huber_delta = 1e10;
    auto prob = scalar_problem([](double x) { return x - 3.0; }, [](double) { return 1.0; });
    auto res = robust_least_squares(prob, vec1(0.0), vec1(-100.0), vec1(100.0), cfg);
    CHECK(res.converged);
    CHECK(std::fabs(res.x(0) - 3.0) <= 1e-10);
}

TEST_CASE("outlier is down-weighted under the robust loss") {
    FitConfig cfg;
    LsqProblem p;
    p.residual_count = 3;
    p.residuals = [](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
        out(0) = x(0) - 1.0;
        out(1) = x(0) - 1.0;
        out(2) = x(0) - 100.0;
    };
    p.jacobian = [](const Eigen::VectorXd&, Eigen::MatrixXd& J) { J.setOnes(); };
    auto res = robust_least_squares(p, vec1(34.0), vec1(-1e4), vec1(1e4), cfg);

    // grid-search oracle over the same robust objective
    auto huber = [&](double r) {
        double a = std::fabs(r);
        return a <= cfg.huber_delta ? 0.5 * r * r : cfg.huber_delta * (a - 0.5 * cfg.huber_delta);
    };
    double best_x = 0.0, best_obj = 1e300;
    for (double x = 0.9; x <= 1.1; x += 1e-5) {
        double obj = 2.0 * huber(x - 1.0) + huber(x - 100.0);
        if (obj < best_obj) {
            best_obj = obj;
            best_x = x;
        }
    }
    CHECK(std::fabs(best_x - 1.0005) <= 2e-5);
    CHECK(std::fabs(res.x(0) - best_x) <= 1e-4);
    CHECK(std::fabs(res.x(0) - 1.0) < std::fabs(34.0 - 1.0));
    CHECK(std::fabs(res.x(0) - 1.0005) <= 1e-6);
}

TEST_CASE("initial point outside bounds is rejected") {
    FitConfig cfg;
    auto prob = scalar_problem([](double x) { return x; }, [](double) { return 1.0; });
    CHECK_THROWS_AS(robust_least_squares(prob, vec1(5.0), vec1(-1.0), vec1(1.0), cfg), UsageError);
}

TEST_CASE("non-finite residual at the initial point is rejected") {
    FitConfig cfg;
    auto prob = scalar_problem([](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
    CHECK_THROWS_AS(robust_least_squares(prob, vec1(-2.0), vec1(-10.0), vec1(10.0), cfg), UsageError);
}

TEST_CASE("exhausted iteration budget reports non-convergence") {
    FitConfig cfg;
    cfg.max_iterations = 2;
    auto prob = scalar_problem([](double x) { return std::exp(x) - 5.0; },
                               [](double x) { return std::exp(x); });
    auto res = robust_least_squares(prob, vec1(-9.0), vec1(-10.0), vec1(10.0), cfg);
    CHECK_FALSE(res.converged);
    CHECK(res.iterations == 2);
}

TEST_CASE("accepted steps never increase the objective") {
    FitConfig cfg;
    auto prob = scalar_problem([](double x) { return std::exp(x) - 5.0; },
                               [](double x) { return std::exp(x); });
    std::vector<double> accepted;
    auto res = robust_least_squares(prob, vec1(-9.0), vec1(-10.0), vec1(10.0), cfg,
                                    [&](int, double obj) { accepted.push_back(obj); });
    CHECK(res.converged);
    REQUIRE(accepted.size() >= 2);
    for (std::size_t i = 1; i < accepted.size(); ++i) CHECK(accepted[i] <= accepted[i - 1]);
}

TEST_CASE("refit from the solution reproduces it") {
    FitConfig cfg;
    LsqProblem p;
    p.residual_count = 2;
    p.residuals = [](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
        out(0) = x(0) - 3.0;
        out(1) = x(0) * x(1) - 6.0;
    };
    p.jacobian = [](const Eigen::VectorXd& x, Eigen::MatrixXd& J) {
        J.setZero();
        J(0, 0) = 1.0;
        J(1, 0) = x(1);
        J(1, 1) = x(0);
    };
    Eigen::VectorXd lo(2), hi(2), init(2);
    lo << -10.0, -10.0;
    hi << 10.0, 10.0;
    init << 1.0, 1.0;
    auto first = robust_least_squares(p, init, lo, hi, cfg);
    auto second = robust_least_squares(p, first.x, lo, hi, cfg);
    CHECK((second.x - first.x).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("noiseless grid is recovered to stated accuracy") {
    LawParams star{1000.0, 0.4, 100.0, 0.3, 2.0};
    FitConfig cfg;
    auto fit = fit_per_optimizer(grid_points(star, "adamw"), cfg);
    CHECK(fit.converged);
    CHECK(fit.kind == ModelKind::Chinchilla);
    CHECK(std::fabs(fit.theta.a / star.a - 1.0) <= 1e-3);
    CHECK(std::fabs(fit.theta.alpha / star.alpha - 1.0) <= 1e-3);
    CHECK(std::fabs(fit.theta.b / star.b - 1.0) <= 1e-3);
    CHECK(std::fabs(fit.theta.beta / star.beta - 1.0) <= 1e-3);
    CHECK(std::fabs(fit.theta.e - star.e) <= 1e-4);
    CHECK(fit.train_fit_error <= 1e-12);

    // parameters stay inside the fitting box
    auto bounds = bounds_for(grid_points(star, "adamw"), cfg);
    CHECK(fit.theta.alpha >= bounds.alpha_lo);
    CHECK(fit.theta.alpha <= bounds.alpha_hi);
    CHECK(fit.theta.beta >= bounds.beta_lo);
    CHECK(fit.theta.beta <= bounds.beta_hi);
    CHECK(fit.theta.a >= bounds.scale_lo);
    CHECK(fit.theta.a <= bounds.scale_hi);
    CHECK(fit.theta.e >= bounds.e_lo);
    CHECK(fit.theta.e <= bounds.e_hi);
}

TEST_CASE("too few points is underdetermined") {
    LawParams star{1000.0, 0.4, 100.0, 0.3, 2.0};
    FitPoints pts = grid_points(star, "adamw");
    pts.log_n.resize(5);
    pts.log_d.resize(5);
    pts.log_loss.resize(5);
    pts.optimizer.resize(5);
    CHECK_THROWS_AS(fit_per_optimizer(pts, FitConfig{}), DataError);
}

TEST_CASE("mixed optimizer labels are rejected") {
    LawParams star{1000.0, 0.4, 100.0, 0.3, 2.0};
    FitPoints pts = grid_points(star, "adamw");
    pts.optimizer[3] = "muon";
    CHECK_THROWS_AS(fit_per_optimizer(pts, FitConfig{}), UsageError);
}

TEST_CASE("identical inputs give bitwise-identical fits") {
    LawParams star{600.0, 0.45, 300.0, 0.33, 1.8};
    FitConfig cfg;
    auto a = fit_per_optimizer(grid_points(star, "adamw"), cfg);
    auto b = fit_per_optimizer(grid_points(star, "adamw"), cfg);
    CHECK(a.theta.a == b.theta.a);
    CHECK(a.theta.alpha == b.theta.alpha);
    CHECK(a.theta.b == b.theta.b);
    CHECK(a.theta.beta == b.theta.beta);
    CHECK(a.theta.e == b.theta.e);
    CHECK(a.objective == b.objective);
    CHECK(a.start_index == b.start_index);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("data bounds pin the irreducible term to the observed range") {
    LawParams star{1000.0, 0.4, 100.0, 0.3, 2.0};
    FitPoints pts = grid_points(star, "adamw");
    double min_loss = 1e300;
    for (double ll : pts.log_loss) min_loss = std::min(min_loss, std::exp(ll));
    auto bounds = bounds_for(pts, FitConfig{});
    CHECK(bounds.e_lo == doctest::Approx(0.1 * min_loss).epsilon(1e-12));
    CHECK(bounds.e_hi == doctest::Approx(min_loss).epsilon(1e-12));
}

TEST_CASE("doubled data axis is recovered as a factor of two") {
    LawParams star{1000.0, 0.4, 100.0, 0.3, 2.0};
    FitPoints pts = grid_points(star, "adamw");
    append(pts, grid_points(star, "muon", 1.0, 2.0));
    auto res = fit_shared(pts, "adamw", FitConfig{});

    CHECK(res.reference_optimizer == "adamw");
    REQUIRE(res.per_optimizer.count("adamw") == 1);
    REQUIRE(res.per_optimizer.count("muon") == 1);
    const auto& ref = res.per_optimizer.at("adamw");
    CHECK(ref.factors.rho_n == 1.0);
    CHECK(ref.factors.rho_second == 1.0);

    const auto& muon = res.per_optimizer.at("muon");
    CHECK(muon.factors.rho_second >= 1.98);
    CHECK(muon.factors.rho_second <= 2.02);
    CHECK(muon.factors.rho_n >= 0.99);
    CHECK(muon.factors.rho_n <= 1.01);
    CHECK(muon.fit_error <= 1e-10);
}

TEST_CASE("optimizer identical to the reference gets unit factors") {
    LawParams star{1000.0, 0.4, 100.0, 0.3, 2.0};
    FitPoints pts = grid_points(star, "adamw");
    append(pts, grid_points(star, "soap"));
    auto res = fit_shared(pts, "adamw", FitConfig{});
    const auto& soap = res.per_optimizer.at("soap");
    CHECK(std::fabs(soap.factors.rho_n - 1.0) <= 1e-3);
    CHECK(std::fabs(soap.factors.rho_second - 1.0) <= 1e-3);
}

TEST_CASE("missing reference label is rejected") {
    LawParams star{1000.0, 0.4, 100.0, 0.3, 2.0};
    CHECK_THROWS_AS(fit_shared(grid_points(star, "adamw"), "muon", FitConfig{}), UsageError);
}

TEST_CASE("factor fit needs at least two points per optimizer") {
    LawParams star{1000.0, 0.4, 100.0, 0.3, 2.0};
    FitPoints pts = grid_points(star, "adamw");
    pts.log_n.push_back(std::log(5e8));
    pts.log_d.push_back(std::log(5e10));
    pts.log_loss.push_back(std::log(eval_chinchilla(star, 5e8, 5e10)));
    pts.optimizer.push_back("muon");
    CHECK_THROWS_AS(fit_shared(pts, "adamw", FitConfig{}), DataError);
}

TEST_CASE("injected compute rescaling is recovered") {
    LawParams star{800.0, 0.42, 2000.0, 0.31, 1.9};
    FitPoints pts;
    pts.axis = SecondAxis::Compute;
    auto add = [&](const std::string& label, double rho_c) {
        for (double n : kSizes)
            for (double r : kRatios) {
                double c = 6.0 * n * (n * r);
                pts.log_n.push_back(std::log(n));
                pts.log_d.push_back(std::log(c / rho_c));
                pts.log_loss.push_back(std::log(eval_chinchilla(star, n, c)));
                pts.optimizer.push_back(label);
            }
    };
    add("adamw", 1.0);
    add("muon", 1.44);
    auto res = fit_compute_form(pts, "adamw", FitConfig{});
    CHECK(res.axis == SecondAxis::Compute);
    const auto& muon = res.per_optimizer.at("muon");
    CHECK(std::fabs(muon.factors.rho_second / 1.44 - 1.0) <= 0.01);
    CHECK(std::fabs(muon.factors.rho_n - 1.0) <= 0.01);
}

TEST_CASE("compute form rejects data-axis points") {
    LawParams star{1000.0, 0.4, 100.0, 0.3, 2.0};
    CHECK_THROWS_AS(fit_compute_form(grid_points(star, "adamw"), "adamw", FitConfig{}), UsageError);
}
