#include "optlaw/validation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "optlaw/errors.hpp"
#include "optlaw/law_models.hpp"

namespace optlaw {

namespace {

FitPoints drop_row(const FitPoints& points, std::size_t skip) {
    FitPoints out;
    out.axis = points.axis;
    out.log_n.reserve(points.size() - 1);
    out.log_d.reserve(points.size() - 1);
    out.log_loss.reserve(points.size() - 1);
    out.optimizer.reserve(points.size() - 1);
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i == skip) continue;
        out.log_n.push_back(points.log_n[i]);
        out.log_d.push_back(points.log_d[i]);
        out.log_loss.push_back(points.log_loss[i]);
        out.optimizer.push_back(points.optimizer[i]);
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// population standard deviation about the sample mean
double pop_std(const std::vector<double>& v) {
    double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

std::optional<double> pearson(const std::vector<double>& u, const std::vector<double>& v) {
    double mu = mean_of(u), mv = mean_of(v);
    double suu = 0.0, svv = 0.0, suv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        suu += (u[i] - mu) * (u[i] - mu);
        svv += (v[i] - mv) * (v[i] - mv);
        suv += (u[i] - mu) * (v[i] - mv);
    }
    if (suu == 0.0 || svv == 0.0) return std::nullopt;
    double r = suv / std::sqrt(suu * svv);
    return std::clamp(r, -1.0, 1.0);
}

std::map<std::string, std::size_t> label_counts(const FitPoints& points) {
    std::map<std::string, std::size_t> counts;
    for (const auto& label : points.optimizer) ++counts[label];
    return counts;
}

LawParams theta_from_vector(const std::vector<double>& v) {
    return LawParams{v[0], v[1], v[2], v[3], v[4]};
}

}  // namespace

LooReport loocv(const FitPoints& points, const LooProcedure& procedure,
                const FitConfig& config) {
    (void)config;
    const std::size_t m = points.size();
    if (m < 7)
        throw DataError("leave-one-out needs at least 7 points, got " + std::to_string(m));

    LooReport report;
    report.param_names = procedure.param_names;
    report.optimizer = procedure.label;
    report.full_fit = procedure.fit(points);

    const std::size_t p = report.full_fit.size();
    report.samples.reserve(m);
    report.held_out_error.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> sample;
        try {
            sample = procedure.fit(drop_row(points, i));
        } catch (const DataError& e) {
            throw DataError("fold " + std::to_string(i) + ": " + e.what());
        }
        double pred = procedure.predict_log_loss(sample, points.log_n[i], points.log_d[i],
                                                 points.optimizer[i]);
        double err = points.log_loss[i] - pred;
        report.held_out_error.push_back(err * err);
        report.samples.push_back(std::move(sample));
    }

    report.mean.assign(p, 0.0);
    report.stddev.assign(p, 0.0);
    for (const auto& sample : report.samples)
        for (std::size_t j = 0; j < p; ++j) report.mean[j] += sample[j];
    for (std::size_t j = 0; j < p; ++j) report.mean[j] /= static_cast<double>(m);
    for (const auto& sample : report.samples)
        for (std::size_t j = 0; j < p; ++j) {
            double dev = report.mean[j] - sample[j];
            report.stddev[j] += dev * dev;
        }
    for (std::size_t j = 0; j < p; ++j)
        report.stddev[j] = std::sqrt(report.stddev[j] / static_cast<double>(m));

    report.test_fit_error = mean_of(report.held_out_error);
    return report;
}

LooProcedure chinchilla_procedure(const FitConfig& config) {
    LooProcedure proc;
    proc.param_names = {"A", "alpha", "B", "beta", "E"};
    proc.fit = [config](const FitPoints& pts) {
        FitResult r = fit_per_optimizer(pts, config);
        return std::vector<double>{r.theta.a, r.theta.alpha, r.theta.b, r.theta.beta,
                                   r.theta.e};
    };
    proc.predict_log_loss = [](const std::vector<double>& v, double log_n, double log_d,
                               const std::string&) {
        return std::log(eval_chinchilla(theta_from_vector(v), std::exp(log_n),
                                        std::exp(log_d)));
    };
    return proc;
}

LooProcedure shared_procedure(const FitPoints& all_points, const std::string& reference,
                              const FitConfig& config) {
    auto counts = label_counts(all_points);
    auto ref_it = counts.find(reference);
    if (ref_it == counts.end())
        throw UsageError("reference optimizer '" + reference + "' has no points");
    if (ref_it->second < 7)
        throw DataError("shared leave-one-out needs >= 7 reference points, got " +
                        std::to_string(ref_it->second));
    std::vector<std::string> others;
    for (const auto& [label, count] : counts) {
        if (label == reference) continue;
        if (count < 3)
            throw DataError("shared leave-one-out needs >= 3 points for optimizer '" +
                            label + "', got " + std::to_string(count));
        others.push_back(label);
    }

    const SecondAxis axis = all_points.axis;
    const std::string second_name = axis == SecondAxis::Compute ? "rho_C" : "rho_D";

    LooProcedure proc;
    proc.label = "shared:" + reference;
    proc.param_names = {"A", "alpha", "B", "beta", "E"};
    for (const auto& label : others) {
        proc.param_names.push_back(label + ".rho_N");
        proc.param_names.push_back(label + "." + second_name);
    }

    proc.fit = [reference, others, config](const FitPoints& pts) {
        SharedFitResult r = fit_shared(pts, reference, config);
        std::vector<double> v{r.theta_ref.a, r.theta_ref.alpha, r.theta_ref.b,
                              r.theta_ref.beta, r.theta_ref.e};
        for (const auto& label : others) {
            auto it = r.per_optimizer.find(label);
            if (it == r.per_optimizer.end())
                throw DataError("fold dropped every point of optimizer '" + label + "'");
            v.push_back(it->second.factors.rho_n);
            v.push_back(it->second.factors.rho_second);
        }
        return v;
    };
    proc.predict_log_loss = [reference, others, axis](const std::vector<double>& v,
                                                      double log_n, double log_d,
                                                      const std::string& optimizer) {
        OptimizerFactors f;
        f.axis = axis;
        if (optimizer != reference) {
            auto it = std::find(others.begin(), others.end(), optimizer);
            if (it == others.end())
                throw DataError("unknown optimizer '" + optimizer + "' in held-out row");
            std::size_t idx = 5 + 2 * static_cast<std::size_t>(it - others.begin());
            f.rho_n = v[idx];
            f.rho_second = v[idx + 1];
        }
        return std::log(eval_shared(theta_from_vector(v), f, std::exp(log_n),
                                    std::exp(log_d)));
    };
    return proc;
}

std::pair<double, double> default_anchors(const FitPoints& points) {
    if (points.size() == 0) throw UsageError("cannot derive anchors from an empty point set");
    auto [n_lo, n_hi] = std::minmax_element(points.log_n.begin(), points.log_n.end());
    auto [d_lo, d_hi] = std::minmax_element(points.log_d.begin(), points.log_d.end());
    return {std::exp(0.5 * (*n_lo + *n_hi)), std::exp(0.5 * (*d_lo + *d_hi))};
}

CorrelationReport correlation_diagnostics(const LooReport& report,
                                          std::pair<double, double> anchors) {
    if (report.samples.size() < 3)
        throw UsageError("correlation diagnostics need at least 3 samples");
    if (report.param_names.size() < 5 || report.param_names[0] != "A" ||
        report.param_names[1] != "alpha" || report.param_names[2] != "B" ||
        report.param_names[3] != "beta")
        throw UsageError("report does not carry (A, alpha, B, beta, E) parameters");
    if (!(anchors.first > 0.0) || !(anchors.second > 0.0))
        throw UsageError("anchors must be positive");

    const double ln_nc = std::log(anchors.first);
    const double ln_dc = std::log(anchors.second);

    CorrelationReport out;
    out.anchor_n = anchors.first;
    out.anchor_d = anchors.second;

    std::vector<double> ln_a, alpha, ln_b, beta, a_raw, b_raw;
    for (const auto& s : report.samples) {
        ln_a.push_back(std::log(s[0]));
        alpha.push_back(s[1]);
        ln_b.push_back(std::log(s[2]));
        beta.push_back(s[3]);
        a_raw.push_back(s[0]);
        b_raw.push_back(s[2]);
        out.a_over_nc.push_back(s[0] * std::exp(-s[1] * ln_nc));
        out.b_over_dc.push_back(s[2] * std::exp(-s[3] * ln_dc));
    }

    out.corr_ln_a_alpha = pearson(ln_a, alpha);
    out.corr_ln_b_beta = pearson(ln_b, beta);

    auto cv = [](const std::vector<double>& v) -> std::optional<double> {
        double m = mean_of(v);
        if (m == 0.0) return std::nullopt;
        return pop_std(v) / m;
    };
    out.cv_a_over_nc = cv(out.a_over_nc);
    out.cv_b_over_dc = cv(out.b_over_dc);
    out.cv_a = cv(a_raw);
    out.cv_b = cv(b_raw);
    return out;
}

ExtrapolationReport extrapolation_eval(const RunSet& runs, long long threshold_n,
                                       const std::string& reference,
                                       const FitConfig& config) {
    if (threshold_n < 1) throw UsageError("threshold_n must be positive");

    bool any_test = false;
    for (const auto& rec : runs.records)
        if (rec.n_params >= threshold_n) any_test = true;
    if (!any_test)
        throw UsageError("threshold_n lies above every record; nothing to hold out");

    RunSet train, test;
    for (const auto& rec : runs.records)
        (rec.n_params < threshold_n ? train : test).records.push_back(rec);

    std::set<std::string> labels;
    for (const auto& rec : runs.records) labels.insert(rec.optimizer);
    if (labels.find(reference) == labels.end())
        throw UsageError("reference optimizer '" + reference + "' has no records");
    std::map<std::string, std::size_t> train_counts, test_counts;
    for (const auto& rec : train.records) ++train_counts[rec.optimizer];
    for (const auto& rec : test.records) ++test_counts[rec.optimizer];
    for (const auto& label : labels) {
        if (train_counts[label] < 6)
            throw DataError("optimizer '" + label + "' has fewer than 6 records below the threshold");
        if (test_counts[label] < 1)
            throw DataError("optimizer '" + label + "' has no records at or above the threshold");
    }

    FitPoints train_all = to_log_points(train, SecondAxis::Data);
    SharedFitResult shared = fit_shared(train_all, reference, config);

    ExtrapolationReport out;
    out.threshold_n = threshold_n;
    out.reference = reference;

    auto guard = [](double x) { return std::max(x, 1e-300); };
    for (const auto& label : labels) {
        FilterCriteria only;
        only.optimizer = label;
        FitPoints train_o = to_log_points(filter_runs(train, only), SecondAxis::Data);
        FitResult naive = fit_per_optimizer(train_o, config);

        OptimizerFactors f;
        if (label != reference) f = shared.per_optimizer.at(label).factors;

        double naive_sq = 0.0, shared_sq = 0.0;
        std::size_t m = 0;
        for (const auto& rec : test.records) {
            if (rec.optimizer != label) continue;
            double n = static_cast<double>(rec.n_params);
            double d = static_cast<double>(rec.tokens);
            double obs = std::log(rec.loss);
            double en = obs - std::log(eval_chinchilla(naive.theta, n, d));
            double es = obs - std::log(eval_shared(shared.theta_ref, f, n, d));
            naive_sq += en * en;
            shared_sq += es * es;
            ++m;
        }
        out.optimizers.push_back(label);
        out.naive_mse.push_back(naive_sq / static_cast<double>(m));
        out.shared_mse.push_back(shared_sq / static_cast<double>(m));
        out.ratio.push_back(out.naive_mse.back() / guard(out.shared_mse.back()));
    }

    out.naive_mse_mean = mean_of(out.naive_mse);
    out.shared_mse_mean = mean_of(out.shared_mse);
    out.ratio_overall = out.naive_mse_mean / guard(out.shared_mse_mean);
    return out;
}

}  // namespace optlaw
