#include "optlaw/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "optlaw/errors.hpp"

namespace optlaw {

namespace {

double huber(double r, double delta) {
    double a = std::abs(r);
    return a <= delta ? 0.5 * r * r : delta * a - 0.5 * delta * delta;
}

double huber_objective(const Eigen::VectorXd& r, double delta) {
    double s = 0.0;
    for (int i = 0; i < r.size(); ++i) s += huber(r[i], delta);
    return s;
}

Eigen::VectorXd clamp_to(const Eigen::VectorXd& v, const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi) {
    return v.cwiseMax(lo).cwiseMin(hi);
}

struct PointArrays {
    std::vector<double> x;  // ln N
    std::vector<double> y;  // ln D or ln C
    std::vector<double> z;  // ln L
};

PointArrays arrays(const FitPoints& pts) {
    return {pts.log_n, pts.log_d, pts.log_loss};
}

// Chinchilla residuals/jacobian in internal coordinates u = (lnA, alpha, lnB, beta, E).
void chin_residuals(const PointArrays& p, const Eigen::VectorXd& u, Eigen::VectorXd& r) {
    for (std::size_t i = 0; i < p.x.size(); ++i) {
        double t1 = std::exp(u[0] - u[1] * p.x[i]);
        double t2 = std::exp(u[2] - u[3] * p.y[i]);
        r[i] = p.z[i] - std::log(t1 + t2 + u[4]);
    }
}

void chin_jacobian(const PointArrays& p, const Eigen::VectorXd& u, Eigen::MatrixXd& J) {
    for (std::size_t i = 0; i < p.x.size(); ++i) {
        double t1 = std::exp(u[0] - u[1] * p.x[i]);
        double t2 = std::exp(u[2] - u[3] * p.y[i]);
        double inv = -1.0 / (t1 + t2 + u[4]);
        J(i, 0) = inv * t1;
        J(i, 1) = inv * (-t1 * p.x[i]);
        J(i, 2) = inv * t2;
        J(i, 3) = inv * (-t2 * p.y[i]);
        J(i, 4) = inv;
    }
}

// Rho residuals/jacobian in v = (ln rho_n, ln rho_second) with theta fixed.
struct ThetaLogs {
    double ln_a, alpha, ln_b, beta, e;
};

void rho_residuals(const PointArrays& p, const ThetaLogs& th, const Eigen::VectorXd& v,
                   Eigen::VectorXd& r) {
    for (std::size_t i = 0; i < p.x.size(); ++i) {
        double t1 = std::exp(th.ln_a - th.alpha * (v[0] + p.x[i]));
        double t2 = std::exp(th.ln_b - th.beta * (v[1] + p.y[i]));
        r[i] = p.z[i] - std::log(t1 + t2 + th.e);
    }
}

void rho_jacobian(const PointArrays& p, const ThetaLogs& th, const Eigen::VectorXd& v,
                  Eigen::MatrixXd& J) {
    for (std::size_t i = 0; i < p.x.size(); ++i) {
        double t1 = std::exp(th.ln_a - th.alpha * (v[0] + p.x[i]));
        double t2 = std::exp(th.ln_b - th.beta * (v[1] + p.y[i]));
        double inv = 1.0 / (t1 + t2 + th.e);
        J(i, 0) = inv * th.alpha * t1;
        J(i, 1) = inv * th.beta * t2;
    }
}

double mean_sq(const Eigen::VectorXd& r) {
    return r.squaredNorm() / static_cast<double>(r.size());
}

std::map<std::string, std::vector<std::size_t>> group_by_optimizer(const FitPoints& pts) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < pts.size(); ++i) groups[pts.optimizer[i]].push_back(i);
    return groups;
}

FitPoints subset(const FitPoints& pts, const std::vector<std::size_t>& idx) {
    FitPoints out;
    out.axis = pts.axis;
    for (std::size_t i : idx) {
        out.log_n.push_back(pts.log_n[i]);
        out.log_d.push_back(pts.log_d[i]);
        out.log_loss.push_back(pts.log_loss[i]);
        out.optimizer.push_back(pts.optimizer[i]);
    }
    return out;
}

SharedFitResult fit_shared_impl(const FitPoints& points, const std::string& reference,
                                const FitConfig& config) {
    auto groups = group_by_optimizer(points);
    auto ref_it = groups.find(reference);
    if (ref_it == groups.end())
        throw UsageError("reference optimizer '" + reference + "' not present in the data");

    SharedFitResult result;
    result.reference_optimizer = reference;
    result.axis = points.axis;
    result.reference_fit = fit_per_optimizer(subset(points, ref_it->second), config);
    result.theta_ref = result.reference_fit.theta;

    SharedOptimizerEntry ref_entry;
    ref_entry.factors = OptimizerFactors{1.0, 1.0, points.axis};
    ref_entry.fit_error = result.reference_fit.train_fit_error;
    result.per_optimizer.emplace(reference, ref_entry);

    ThetaLogs th{std::log(result.theta_ref.a), result.theta_ref.alpha,
                 std::log(result.theta_ref.b), result.theta_ref.beta, result.theta_ref.e};

    // (1,1) plus {0.5, 2} applied to one axis at a time
    const double rho_starts[5][2] = {{1.0, 1.0}, {0.5, 1.0}, {2.0, 1.0}, {1.0, 0.5}, {1.0, 2.0}};

    for (const auto& [label, idx] : groups) {
        if (label == reference) continue;
        if (idx.size() < 2)
            throw DataError("optimizer '" + label + "' has " + std::to_string(idx.size()) +
                            " points; the 2-parameter factor fit needs at least 2");
        PointArrays p = arrays(subset(points, idx));
        LsqProblem prob;
        prob.residual_count = static_cast<int>(p.x.size());
        prob.residuals = [&p, &th](const Eigen::VectorXd& v, Eigen::VectorXd& r) {
            rho_residuals(p, th, v, r);
        };
        prob.jacobian = [&p, &th](const Eigen::VectorXd& v, Eigen::MatrixXd& J) {
            rho_jacobian(p, th, v, J);
        };
        Eigen::VectorXd lo(2), hi(2);
        lo << std::log(config.bounds.rho_lo), std::log(config.bounds.rho_lo);
        hi << std::log(config.bounds.rho_hi), std::log(config.bounds.rho_hi);

        double best_obj = std::numeric_limits<double>::infinity();
        LsqResult best;
        for (int s = 0; s < 5; ++s) {
            Eigen::VectorXd v0(2);
            v0 << std::log(rho_starts[s][0]), std::log(rho_starts[s][1]);
            LsqResult res = robust_least_squares(prob, v0, lo, hi, config);
            if (res.objective < best_obj - 1e-12) {
                best_obj = res.objective;
                best = res;
            }
        }
        SharedOptimizerEntry entry;
        entry.factors.rho_n = std::exp(best.x[0]);
        entry.factors.rho_second = std::exp(best.x[1]);
        entry.factors.axis = points.axis;
        Eigen::VectorXd r(prob.residual_count);
        rho_residuals(p, th, best.x, r);
        entry.fit_error = mean_sq(r);
        result.per_optimizer.emplace(label, entry);
    }
    return result;
}

}  // namespace

LsqResult robust_least_squares(const LsqProblem& problem, const Eigen::VectorXd& init,
                               const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                               const FitConfig& config,
                               const std::function<void(int, double)>& on_accept) {
    const int p = static_cast<int>(init.size());
    const int m = problem.residual_count;
    for (int i = 0; i < p; ++i)
        if (init[i] < lower[i] || init[i] > upper[i])
            throw UsageError("initial point outside bounds at coordinate " + std::to_string(i));

    Eigen::VectorXd x = init;
    Eigen::VectorXd r(m), rt(m), g(p), h(p), w(m);
    Eigen::MatrixXd J(m, p), H(p, p), A(p, p);

    problem.residuals(x, r);
    if (!r.allFinite()) throw UsageError("non-finite residual at the initial point");
    double obj = huber_objective(r, config.huber_delta);

    double mu = 1e-3;
    int iters = 0;
    bool converged = false;

    while (iters < config.max_iterations) {
        ++iters;
        problem.jacobian(x, J);
        for (int i = 0; i < m; ++i) {
            double a = std::abs(r[i]);
            w[i] = a <= config.huber_delta ? 1.0 : config.huber_delta / a;
        }
        g = J.transpose() * (w.asDiagonal() * r);

        double pg = 0.0;
        for (int i = 0; i < p; ++i) {
            double moved = std::clamp(x[i] - g[i], lower[i], upper[i]) - x[i];
            pg = std::max(pg, std::abs(moved));
        }
        if (pg <= config.gradient_tolerance) {
            converged = true;
            break;
        }

        H = J.transpose() * w.asDiagonal() * J;
        Eigen::VectorXd scale = H.diagonal().cwiseMax(1e-12);

        bool accepted = false;
        while (true) {
            A = H;
            A.diagonal() += mu * scale;
            h = A.ldlt().solve(-g);
            Eigen::VectorXd xt = clamp_to(x + h, lower, upper);
            problem.residuals(xt, rt);
            double objt = rt.allFinite() ? huber_objective(rt, config.huber_delta)
                                         : std::numeric_limits<double>::infinity();
            if (objt <= obj) {
                double step = (xt - x).norm();
                x = xt;
                r.swap(rt);
                obj = objt;
                mu = std::max(mu / 3.0, 1e-12);
                accepted = true;
                if (on_accept) on_accept(iters, obj);
                if (step <= config.step_tolerance * (x.norm() + config.step_tolerance))
                    converged = true;
                break;
            }
            mu *= 4.0;
            if (mu > 1e14) break;
        }
        if (!accepted || converged) break;
    }

    LsqResult out;
    out.x = x;
    out.objective = obj;
    out.converged = converged;
    out.iterations = iters;
    return out;
}

ParamBounds bounds_for(const FitPoints& points, const FitConfig& config) {
    ParamBounds b = config.bounds;
    double min_log_loss = *std::min_element(points.log_loss.begin(), points.log_loss.end());
    double min_loss = std::exp(min_log_loss);
    b.e_lo = 0.1 * min_loss;
    b.e_hi = min_loss;
    return b;
}

FitResult fit_per_optimizer(const FitPoints& points, const FitConfig& config) {
    if (points.size() < 6)
        throw DataError("underdetermined fit: need at least 6 points, got " +
                        std::to_string(points.size()));
    for (std::size_t i = 1; i < points.size(); ++i)
        if (points.optimizer[i] != points.optimizer[0])
            throw UsageError("fit_per_optimizer needs points from a single optimizer; got '" +
                             points.optimizer[0] + "' and '" + points.optimizer[i] + "'");

    ParamBounds b = bounds_for(points, config);
    PointArrays p = arrays(points);
    double min_loss = b.e_hi;

    LsqProblem prob;
    prob.residual_count = static_cast<int>(points.size());
    prob.residuals = [&p](const Eigen::VectorXd& u, Eigen::VectorXd& r) {
        chin_residuals(p, u, r);
    };
    prob.jacobian = [&p](const Eigen::VectorXd& u, Eigen::MatrixXd& J) {
        chin_jacobian(p, u, J);
    };

    Eigen::VectorXd lo(5), hi(5);
    lo << std::log(b.scale_lo), b.alpha_lo, std::log(b.scale_lo), b.beta_lo, b.e_lo;
    hi << std::log(b.scale_hi), b.alpha_hi, std::log(b.scale_hi), b.beta_hi, b.e_hi;

    double best_obj = std::numeric_limits<double>::infinity();
    LsqResult best;
    int best_start = -1;
    int start_index = 0;
    for (double a0 : config.alpha_starts)
        for (double b0 : config.beta_starts)
            for (double sa : config.scale_starts)
                for (double sb : config.scale_starts)
                    for (double ef : config.e_fracs) {
                        Eigen::VectorXd u0(5);
                        u0 << std::log(sa), a0, std::log(sb), b0, ef * min_loss;
                        LsqResult res = robust_least_squares(prob, u0, lo, hi, config);
                        if (res.objective < best_obj - 1e-12) {
                            best_obj = res.objective;
                            best = res;
                            best_start = start_index;
                        }
                        ++start_index;
                    }

    FitResult out;
    out.kind = ModelKind::Chinchilla;
    out.theta = LawParams{std::exp(best.x[0]), best.x[1], std::exp(best.x[2]), best.x[3],
                          best.x[4]};
    out.objective = best.objective;
    Eigen::VectorXd r(prob.residual_count);
    chin_residuals(p, best.x, r);
    out.train_fit_error = mean_sq(r);
    out.converged = best.converged;
    out.iterations = best.iterations;
    out.start_index = best_start;
    return out;
}

SharedFitResult fit_shared(const FitPoints& points, const std::string& reference,
                           const FitConfig& config) {
    return fit_shared_impl(points, reference, config);
}

SharedFitResult fit_compute_form(const FitPoints& points, const std::string& reference,
                                 const FitConfig& config) {
    if (points.axis != SecondAxis::Compute)
        throw UsageError("fit_compute_form needs points built on the compute axis");
    return fit_shared_impl(points, reference, config);
}

}  // namespace optlaw
