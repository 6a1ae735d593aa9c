// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// argv[1] is the CLI binary (used by the determinism criterion).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "optlaw/fitter.hpp"
#include "optlaw/law_models.hpp"
#include "optlaw/noise.hpp"
#include "optlaw/run_store.hpp"
#include "optlaw/spectral_sim.hpp"
#include "optlaw/validation.hpp"

using namespace optlaw;
namespace fs = std::filesystem;

namespace {

std::string g_cli;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

LawParams make_theta(double a, double al, double b, double be, double e) {
    LawParams t;
    t.a = a;
    t.alpha = al;
    t.b = b;
    t.beta = be;
    t.e = e;
    return t;
}

SpectrumConfig quad_spectrum() {
    SpectrumConfig cfg;
    cfg.alpha_spec = 2.0;
    cfg.beta_spec = 3.0;
    cfg.gamma_l = 0.5;
    cfg.delta_scale = 1.0;
    cfg.l_star = 0.0;
    return cfg;
}

double rel_err(double got, double want) {
    return std::fabs(got - want) / std::max(std::fabs(want), 1e-300);
}

// --- adaptive Simpson oracle for the incomplete gamma ---------------------

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa,
                    double fm, double fb, double whole, double eps, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::fabs(left + right - whole) <= 15.0 * eps)
        return left + right + (left + right - whole) / 15.0;
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b) {
    if (!(b > a)) return 0.0;
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    double eps = std::max(std::fabs(whole) * 1e-13, 1e-300);
    return simpson_step(f, a, b, fa, fm, fb, whole, eps, 48);
}

// integral_x^inf t^(s-1) e^-t dt; the [x, 1) piece is computed under t = u^2
// so the s = 0.5 endpoint stays smooth.
double gamma_oracle(double s, double x) {
    auto direct = [s](double t) { return std::pow(t, s - 1.0) * std::exp(-t); };
    auto squared = [s](double u) { return 2.0 * std::pow(u, 2.0 * s - 1.0) * std::exp(-u * u); };
    double cutoff = std::max(x, 1.0) + 250.0;
    if (x < 1.0)
        return integrate(squared, std::sqrt(x), 1.0) + integrate(direct, 1.0, cutoff);
    return integrate(direct, x, cutoff);
}

// --- shared fixture builders ----------------------------------------------

FitPoints section3_points(const LawParams& th, double sigma, std::uint64_t seed) {
    GaussianNoise g(seed);
    FitPoints pts;
    for (double n : {5e7, 1.4e8, 2.5e8, 5e8, 1.5e9})
        for (double r : {30.0, 50.0, 100.0, 200.0}) {
            double d = n * r;
            double loss = eval_chinchilla(th, n, d);
            if (sigma > 0.0) loss *= std::exp(sigma * g());
            pts.log_n.push_back(std::log(n));
            pts.log_d.push_back(std::log(d));
            pts.log_loss.push_back(std::log(loss));
            pts.optimizer.push_back("adamw");
        }
    return pts;
}

FitPoints two_optimizer_points(const LawParams& th, const OptimizerFactors& rho, double sigma,
                               std::uint64_t seed) {
    GaussianNoise g(seed);
    FitPoints pts;
    for (double n : {1e7, 5.6e7, 3.2e8, 1.8e9, 1e10})
        for (double r : {10.0, 50.0, 250.0, 1250.0, 6250.0}) {
            double d = n * r;
            double la = eval_chinchilla(th, n, d);
            double lm = eval_shared(th, rho, n, d);
            if (sigma > 0.0) {
                la *= std::exp(sigma * g());
                lm *= std::exp(sigma * g());
            }
            pts.log_n.push_back(std::log(n));
            pts.log_d.push_back(std::log(d));
            pts.log_loss.push_back(std::log(la));
            pts.optimizer.push_back("adamw");
            pts.log_n.push_back(std::log(n));
            pts.log_d.push_back(std::log(d));
            pts.log_loss.push_back(std::log(lm));
            pts.optimizer.push_back("muon");
        }
    return pts;
}

RunSet extrapolation_runs(std::uint64_t seed) {
    LawParams th = make_theta(600, 0.4, 3000, 0.35, 0.8);
    GaussianNoise g(seed);
    RunSet rs;
    auto add = [&](const std::string& opt, double rho_d, double n, double r) {
        OptimizerFactors f;
        f.rho_second = rho_d;
        double d = n * r;
        RunRecord rec;
        rec.optimizer = opt;
        rec.arch = "synthetic";
        rec.n_params = std::llround(n);
        rec.tokens = std::llround(d);
        rec.loss = eval_shared(th, f, n, d) * std::exp(0.005 * g());
        rs.records.push_back(rec);
    };
    for (double n : {1.25e7, 5e7, 2e8, 8e8})
        for (double r : {10.0, 50.0, 250.0, 1250.0, 6250.0}) add("adamw", 1.0, n, r);
    for (double n : {1.25e7, 5e7})
        for (double r : {10.0, 250.0, 6250.0}) {
            add("muon", 1.5, n, r);
            add("scion", 2.0, n, r);
        }
    for (double n : {1.6e9, 6.4e9})
        for (double r : {10.0, 250.0, 6250.0}) {
            add("adamw", 1.0, n, r);
            add("muon", 1.5, n, r);
            add("scion", 2.0, n, r);
        }
    return rs;
}

// --- criteria ---------------------------------------------------------------

bool criterion_1(std::string& note) {
    auto t0 = std::chrono::steady_clock::now();
    SpectrumConfig cfg = quad_spectrum();
    double worst = 0.0;
    for (long long d : {1LL, 10LL, 100LL, 1000LL})
        for (long long k : {0LL, 1LL, 10LL, 1000LL, 100000LL}) {
            LossBreakdown sim = simulate_gd(cfg, d, k);
            LossBreakdown closed = closed_form_excess(cfg, d, k);
            worst = std::max(worst, rel_err(sim.approximation_error, closed.approximation_error));
            worst = std::max(worst, rel_err(sim.optimization_error, closed.optimization_error));
            worst = std::max(worst, rel_err(sim.total_excess, closed.total_excess));
        }
    double dt = seconds_since(t0);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "max relative error %.2e, %.2fs", worst, dt);
    note = buf;
    return worst <= 1e-10 && dt < 10.0;
}

bool criterion_2(std::string& note) {
    SpectrumConfig cfg = quad_spectrum();
    long long d = 10000;
    double ratio = tail_sum(cfg, d) / asymptotic_prediction(cfg, d, 1).predicted_approx;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "tail/C1 prediction ratio %.6f", ratio);
    note = buf;
    return ratio >= 0.99 && ratio <= 1.01;
}

bool criterion_3(std::string& note) {
    SpectrumConfig cfg = quad_spectrum();
    double ratio = closed_form_excess(cfg, 1000, 10000).optimization_error /
                   asymptotic_prediction(cfg, 1000, 10000).predicted_opt;

    std::vector<double> xs, ys;
    for (long long k : {100LL, 316LL, 1000LL, 3162LL, 10000LL}) {
        xs.push_back(std::log(static_cast<double>(k)));
        ys.push_back(std::log(closed_form_excess(cfg, 1000000, k).optimization_error));
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    double slope = sxy / sxx;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "gamma-prediction ratio %.4f, log-log slope %.4f", ratio,
                  slope);
    note = buf;
    return ratio >= 0.95 && ratio <= 1.05 && std::fabs(slope + 2.0) <= 0.03;
}

bool criterion_4(std::string& note) {
    SpectrumConfig cfg = quad_spectrum();
    long long d = 10;
    double worst = 0.0;
    for (long long k : {10000LL, 31623LL, 100000LL}) {
        double ln_exact = closed_form_excess(cfg, d, k).log_optimization_error;
        AsymptoticPrediction p = asymptotic_prediction(cfg, d, k);
        double lambda_d = eigenvalue(cfg, d);
        double ln_pred = std::log(p.c3) - (cfg.beta_spec - 1.0) * std::log(double(d)) -
                         std::log(double(k)) - 2.0 * double(k) * lambda_d;
        worst = std::max(worst, std::fabs(ln_exact - ln_pred) / std::fabs(ln_exact));
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "max log-units deviation %.4f", worst);
    note = buf;
    return worst <= 0.05;
}

bool criterion_5(std::string& note) {
    double worst = 0.0, worst_exp = 0.0;
    for (double s : {0.5, 1.0, 1.5, 2.0, 3.7})
        for (double x : {0.0, 0.1, 1.0, 10.0, 50.0})
            worst = std::max(worst, rel_err(upper_incomplete_gamma(s, x), gamma_oracle(s, x)));
    for (double x : {0.0, 0.1, 1.0, 10.0, 50.0})
        worst_exp = std::max(worst_exp, rel_err(upper_incomplete_gamma(1.0, x), std::exp(-x)));
    char buf[128];
    std::snprintf(buf, sizeof(buf), "vs quadrature %.2e, vs exp(-x) %.2e", worst, worst_exp);
    note = buf;
    return worst <= 1e-9 && worst_exp <= 1e-12;
}

bool criterion_6(std::string& note) {
    auto t0 = std::chrono::steady_clock::now();
    LawParams th = make_theta(1000, 0.4, 100, 0.3, 2.0);
    FitConfig cfg;

    FitResult clean = fit_per_optimizer(section3_points(th, 0.0, 0), cfg);
    double dev = 0.0;
    dev = std::max(dev, rel_err(clean.theta.a, th.a));
    dev = std::max(dev, rel_err(clean.theta.alpha, th.alpha));
    dev = std::max(dev, rel_err(clean.theta.b, th.b));
    dev = std::max(dev, rel_err(clean.theta.beta, th.beta));
    dev = std::max(dev, rel_err(clean.theta.e, th.e));

    double sigma = 0.005;
    FitResult noisy = fit_per_optimizer(section3_points(th, sigma, 6), cfg);
    double mslr_ratio = noisy.train_fit_error / (sigma * sigma);
    double dt = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "noiseless dev %.2e, MSLR/sigma^2 %.3f, %.2fs", dev,
                  mslr_ratio, dt);
    note = buf;
    return dev <= 1e-3 && mslr_ratio >= 0.5 && mslr_ratio <= 2.0 && dt < 30.0;
}

bool criterion_7(std::string& note) {
    LawParams th = make_theta(600, 0.4, 3000, 0.35, 0.8);
    OptimizerFactors rho;
    rho.rho_n = 0.95;
    rho.rho_second = 2.0;
    FitConfig cfg;

    SharedFitResult clean = fit_shared(two_optimizer_points(th, rho, 0.0, 0), "adamw", cfg);
    const OptimizerFactors& f0 = clean.per_optimizer.at("muon").factors;
    double clean_dev = std::max(std::fabs(f0.rho_n - 0.95), std::fabs(f0.rho_second - 2.0));

    double noisy_dev = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SharedFitResult r = fit_shared(two_optimizer_points(th, rho, 0.005, seed), "adamw", cfg);
        const OptimizerFactors& f = r.per_optimizer.at("muon").factors;
        noisy_dev = std::max(noisy_dev, std::fabs(f.rho_n - 0.95));
        noisy_dev = std::max(noisy_dev, std::fabs(f.rho_second - 2.0));
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "noiseless dev %.2e, max noisy dev %.4f over 10 seeds",
                  clean_dev, noisy_dev);
    note = buf;
    return clean_dev <= 0.02 && noisy_dev <= 0.1;
}

bool criterion_8(std::string& note) {
    LawParams th = make_theta(1000, 0.4, 5, 0.3, 0.0);
    FitConfig cfg;
    GaussianNoise g(10);
    FitPoints pts;
    for (double n : {5e7, 2.0e8, 2.4e8, 2.6e8, 2.8e8, 3.0e8, 3.4e8, 8e8, 1.5e9})
        for (double d : {1.5e9, 2.1e10, 3e11}) {
            double loss = eval_chinchilla(th, n, d) * std::exp(0.005 * g());
            pts.log_n.push_back(std::log(n));
            pts.log_d.push_back(std::log(d));
            pts.log_loss.push_back(std::log(loss));
            pts.optimizer.push_back("adamw");
        }
    LooProcedure proc = chinchilla_procedure(cfg);
    proc.label = "adamw";
    LooReport rep = loocv(pts, proc, cfg);
    CorrelationReport corr = correlation_diagnostics(rep, default_anchors(pts));
    double c = corr.corr_ln_a_alpha.value_or(0.0);
    double cv_ratio = (corr.cv_a_over_nc && corr.cv_a && *corr.cv_a > 0.0)
                          ? *corr.cv_a_over_nc / *corr.cv_a
                          : 1e9;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "|corr(lnA, alpha)| %.4f, anchored/raw CV ratio %.4f",
                  std::fabs(c), cv_ratio);
    note = buf;
    return std::fabs(c) >= 0.9 && cv_ratio <= 0.1;
}

bool criterion_9(std::string& note) {
    FitConfig cfg;
    double naive_sum = 0.0, shared_sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        ExtrapolationReport rep = extrapolation_eval(extrapolation_runs(seed), 1000000000LL,
                                                     "adamw", cfg);
        naive_sum += rep.naive_mse_mean;
        shared_sum += rep.shared_mse_mean;
    }
    double ratio = shared_sum / naive_sum;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "10-seed average shared/naive MSE ratio %.4f", ratio);
    note = buf;
    return ratio <= 0.5;
}

bool criterion_10(std::string& note) {
    SpectrumConfig cfg;
    cfg.alpha_spec = 1.2;
    cfg.beta_spec = 1.15;
    cfg.gamma_l = 1.0;
    cfg.delta_scale = 3.0;
    cfg.l_star = 1.0;
    std::vector<std::pair<long long, long long>> grid;
    for (long long k : {100LL, 316LL, 1000LL, 3162LL, 10000LL}) grid.push_back({1000000, k});
    for (double d : {1e3, 3e3, 1e4, 3e4, 1e5})
        grid.push_back({static_cast<long long>(d), std::llround(0.2 * std::pow(d, 1.2))});

    RunSet rs = generate_theory_runs(cfg, grid, 1, 0.0, 0);
    FitResult r = fit_per_optimizer(to_log_points(rs), FitConfig{});
    double omega = 1.0 + (cfg.beta_spec - 1.0) / cfg.alpha_spec;
    double law_exp = cfg.alpha_spec + cfg.beta_spec - 1.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "alpha_hat %.4f (target %.3f), beta_hat %.4f (target %.3f)",
                  r.theta.alpha, law_exp, r.theta.beta, omega);
    note = buf;
    return std::fabs(r.theta.alpha - law_exp) <= 0.05 && std::fabs(r.theta.beta - omega) <= 0.05;
}

// --- determinism ------------------------------------------------------------

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void put_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

// Runs the CLI, returns captured stdout+stderr; exit code in rc_out.
std::string run_cli(const std::string& args, int& rc_out) {
    std::string cmd = g_cli + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) {
        rc_out = -1;
        return "";
    }
    std::string out;
    char buf[4096];
    std::size_t got;
    while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) out.append(buf, got);
    int status = pclose(pipe);
    rc_out = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return out;
}

std::string runs_csv(const RunSet& rs) { return serialize_runs(rs); }

bool criterion_11(std::string& note) {
    if (g_cli.empty()) {
        note = "no CLI binary path given";
        return false;
    }
    fs::path dir = fs::temp_directory_path() / "optlaw_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto at = [&](const std::string& name) { return (dir / name).string(); };

    // fixtures
    LawParams th = make_theta(1000, 0.4, 100, 0.3, 2.0);
    OptimizerFactors rho;
    rho.rho_n = 0.95;
    rho.rho_second = 2.0;
    GaussianNoise g(3);
    RunSet basic, shared, compute;
    for (double n : {5e7, 1.4e8, 2.5e8, 5e8, 1.5e9})
        for (double r : {30.0, 100.0}) {
            double d = n * r;
            RunRecord rec;
            rec.optimizer = "adamw";
            rec.arch = "synthetic";
            rec.n_params = std::llround(n);
            rec.tokens = std::llround(d);
            rec.loss = eval_chinchilla(th, n, d) * std::exp(0.005 * g());
            basic.records.push_back(rec);
            shared.records.push_back(rec);
            rec.compute = 6.0 * n * d;
            compute.records.push_back(rec);
            rec.compute.reset();
            rec.optimizer = "muon";
            rec.loss = eval_shared(th, rho, n, d) * std::exp(0.005 * g());
            shared.records.push_back(rec);
            rec.compute = 6.0 * n * d;
            compute.records.push_back(rec);
        }
    put_file(at("basic.csv"), runs_csv(basic));
    put_file(at("shared.csv"), runs_csv(shared));
    put_file(at("compute.csv"), runs_csv(compute));
    std::string jsonl;
    for (const RunRecord& rec : basic.records) {
        char row[256];
        std::snprintf(row, sizeof(row),
                      "{\"optimizer\":\"%s\",\"arch\":\"%s\",\"n_params\":%lld,"
                      "\"tokens\":%lld,\"loss\":%.17g}\n",
                      rec.optimizer.c_str(), rec.arch.c_str(), rec.n_params, rec.tokens,
                      rec.loss);
        jsonl += row;
    }
    put_file(at("raw.jsonl"), jsonl);
    put_file(at("grid.csv"), "d,k\n200,100\n200,1000\n500,2000\n");
    {
        RunSet ex = extrapolation_runs(1);
        put_file(at("extrap.csv"), runs_csv(ex));
    }

    struct Step {
        std::string name;
        std::string args;
        std::vector<std::string> outputs;
    };
    std::vector<Step> steps = {
        {"ingest", "ingest --in " + at("raw.jsonl") + " --out " + at("canonical.csv"),
         {"canonical.csv"}},
        {"fit", "fit --in " + at("basic.csv") + " --optimizer adamw --out " + at("fit.json"),
         {"fit.json"}},
        {"fit-shared",
         "fit-shared --in " + at("shared.csv") + " --reference adamw --out " + at("sh.json"),
         {"sh.json"}},
        {"fit-compute",
         "fit-compute --in " + at("compute.csv") + " --reference adamw --out " + at("co.json"),
         {"co.json"}},
        {"loocv",
         "loocv --in " + at("basic.csv") + " --optimizer adamw --out " + at("loo.json") +
             " --correlation-out " + at("corr.json") + " --plot-data " + at("p_"),
         {"loo.json", "corr.json", "p_loo_scatter_alpha_A.csv", "p_loo_scatter_beta_B.csv",
          "p_loo_iso_alpha_A.csv", "p_loo_iso_beta_B.csv"}},
        {"extrapolate",
         "extrapolate --in " + at("extrap.csv") + " --reference adamw --threshold 1e9 --out " +
             at("ex.json"),
         {"ex.json"}},
        {"simulate",
         "simulate --alpha 2 --beta 3 --gamma-l 0.5 --delta 1 --l-star 2 --grid " +
             at("grid.csv") + " --noise 0.01 --seed 0 --out " + at("sim.csv"),
         {"sim.csv", "sim.csv.breakdown.json"}},
        {"report",
         "report " + at("fit.json") + " " + at("sh.json") + " " + at("ex.json") + " --out " +
             at("report.txt") + " --plot-data " + at("r_"),
         {"report.txt", "r_extrapolation_bars.csv"}},
    };

    for (const Step& step : steps) {
        int rc1 = 0, rc2 = 0;
        std::string out1 = run_cli(step.args, rc1);
        std::vector<std::string> bytes1;
        for (const std::string& f : step.outputs) bytes1.push_back(slurp(dir / f));
        std::string out2 = run_cli(step.args, rc2);
        if (rc1 != 0 || rc2 != 0) {
            note = step.name + " exited " + std::to_string(rc1) + "/" + std::to_string(rc2) +
                   ": " + out1;
            return false;
        }
        if (out1 != out2) {
            note = step.name + " stdout differs between reruns";
            return false;
        }
        for (std::size_t i = 0; i < step.outputs.size(); ++i) {
            std::string again = slurp(dir / step.outputs[i]);
            if (bytes1[i].empty()) {
                note = step.name + " produced no " + step.outputs[i];
                return false;
            }
            if (again != bytes1[i]) {
                note = step.name + " output " + step.outputs[i] + " differs between reruns";
                return false;
            }
        }
    }
    note = "8 subcommands, all outputs byte-identical across reruns";
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_cli = argv[1];

    struct Criterion {
        int number;
        bool (*run)(std::string&);
    };
    const Criterion criteria[] = {
        {1, criterion_1}, {2, criterion_2}, {3, criterion_3},  {4, criterion_4},
        {5, criterion_5}, {6, criterion_6}, {7, criterion_7},  {8, criterion_8},
        {9, criterion_9}, {10, criterion_10}, {11, criterion_11},
    };

    bool all_pass = true;
    for (const Criterion& c : criteria) {
        std::string note;
        bool ok = false;
        try {
            ok = c.run(note);
        } catch (const std::exception& e) {
            note = std::string("exception: ") + e.what();
        }
        std::printf("criterion %d: %s (%s)\n", c.number, ok ? "PASS" : "FAIL", note.c_str());
        std::fflush(stdout);
        all_pass = all_pass && ok;
    }
    return all_pass ? 0 : 1;
}
