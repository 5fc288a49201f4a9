// Acceptance suite: runs each numbered criterion end to end and prints one
// PASS/FAIL line per criterion. Exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ttsa/analysis.hpp"
#include "ttsa/io.hpp"
#include "ttsa/ode.hpp"

using namespace ttsa;
using Json = nlohmann::json;

namespace {

constexpr std::uint64_t kSeed = 20260810;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

StepSchedule tuned_schedule(const char* name, const ProblemConstants& pc) {
    // beta0 chosen per instance so that every clause, including the extra
    // beta0 <= mu_G / L2^2 one, admits an alpha0 window.
    double beta0 = 0.05;
    if (std::string(name) == "linear-coupled") beta0 = 0.015;
    if (std::string(name) == "polyak-ruppert") beta0 = 0.002;
    (void)pc;
    return auto_tune(pc, beta0, 0.9);
}

// ---------------------------------------------------------------------------
// 1. Rate reproduction: fit of mean_V on the tanh instance under the
//    envelope schedule (a=2/3, b=1, beta0=1/mu_G), R=200, k up to 1e5.
Outcome criterion1() {
    const auto p = make_builtin("nonlinear-tanh", {}, 4);
    const auto noise = isotropic_noise(4, 0.1, 0.1, 0.0);

    std::string tune_note;
    try {
        const auto tuned = auto_tune(p.constants, 1.0 / p.constants.mu_G, 0.9);
        tune_note = "auto_tune(beta0=1/mu_G) -> alpha0=" + fmt(tuned.alpha0);
    } catch (const InfeasibleError&) {
        tune_note = "auto_tune(beta0=1/mu_G) infeasible; alpha0 from the stability default";
    }
    const auto s = envelope_schedule(p.constants);
    const auto dc = derive_constants(p.constants, s, gammas(noise));

    RunConfig rc;
    rc.iterations = 100000;
    rc.seed = kSeed;
    const auto sum = monte_carlo(p, noise, s, rc, 200, dc.eta);
    const auto fit = fit_rate(sum.ks, sum.mean_V, 0.01, 1.0);
    const auto fit_fast = fit_rate(sum.ks, sum.mean_xhat_sq, 0.01, 1.0);

    Outcome o;
    o.pass = fit.slope >= -0.85 && fit.slope <= -0.55 && fit.r2 >= 0.95;
    o.detail = "mean_V slope=" + fmt(fit.slope) + " (target [-0.85,-0.55]), r2=" + fmt(fit.r2) +
               " (>=0.95); mean_xhat_sq slope=" + fmt(fit_fast.slope) + "; " + tune_note;
    if (!o.pass)
        o.detail +=
            "; note: the composite Lyapunov series decays at ~1/k on this instance (the "
            "closed-form envelope is an upper bound, its k^(-2/3) term is not tight here), "
            "while the fast residual alone shows the k^(-2/3) scale";
    return o;
}

// ---------------------------------------------------------------------------
// 2. Lemma suite on all builtins: 100% of the one-step checks under the
//    3-SE rule and the uniform bound along trajectories.
Outcome criterion2() {
    Outcome o;
    o.pass = true;
    for (const char* name : {"linear-coupled", "nonlinear-tanh", "polyak-ruppert"}) {
        const auto p = make_builtin(name, {}, 4);
        const auto noise = isotropic_noise(4, 0.1, 0.1, 0.0);
        const auto s = tuned_schedule(name, p.constants);
        const auto dc = derive_constants(p.constants, s, gammas(noise));
        LemmaCheckConfig cfg;
        cfg.M = 100000;
        cfg.seed = kSeed + 2;
        cfg.traj_replications = 100;
        cfg.traj_iterations = 10000;
        const auto report = check_lemmas(p, noise, s, p.constants, dc, {}, cfg);
        int failed = 0;
        for (const auto& c : report.checks)
            if (!c.pass) ++failed;
        o.pass = o.pass && report.pass;
        o.detail += std::string(name) + ": " + std::to_string(report.checks.size() - failed) +
                    "/" + std::to_string(report.checks.size()) + " checks; ";
    }
    return o;
}

// ---------------------------------------------------------------------------
// 3. Envelope: measured mean_V below the corrected bound at every record.
Outcome criterion3() {
    Outcome o;
    o.pass = true;
    for (const char* name : {"linear-coupled", "nonlinear-tanh", "polyak-ruppert"}) {
        const auto p = make_builtin(name, {}, 4);
        const auto noise = isotropic_noise(4, 0.1, 0.1, 0.0);
        const auto g = gammas(noise);
        const auto s = envelope_schedule(p.constants);

        RunConfig rc;
        rc.iterations = 100000;
        rc.seed = kSeed + 3;
        const Residuals r0 = residuals(p, p.x_star + Vector::Ones(4), p.y_star + Vector::Ones(4));
        const double z0 = r0.x_hat.squaredNorm() + r0.y_hat.squaredNorm();
        const auto dc = derive_constants(p.constants, s, g, z0);
        const auto sum = monte_carlo(p, noise, s, rc, 200, dc.eta);
        const auto rep = envelope_check(sum, dc, p.constants, g, sum.v0);
        double min_margin = std::numeric_limits<double>::infinity();
        for (const auto& c : rep.checks) min_margin = std::min(min_margin, c.margin);
        o.pass = o.pass && rep.pass;
        o.detail += std::string(name) + (rep.pass ? " ok" : " VIOLATED") +
                    " (min margin " + fmt(min_margin) + "); ";
    }
    return o;
}

// ---------------------------------------------------------------------------
// 4. Noise-free convergence under the envelope schedule.
Outcome criterion4() {
    Outcome o;
    o.pass = true;
    for (const char* name : {"linear-coupled", "nonlinear-tanh", "polyak-ruppert"}) {
        const auto p = make_builtin(name, {}, 4);
        const auto noise = build_noise(Eigen::MatrixXd::Zero(4, 4), Eigen::MatrixXd::Zero(4, 4),
                                       Eigen::MatrixXd::Zero(4, 4));
        const auto s = envelope_schedule(p.constants);
        RunConfig rc;
        rc.iterations = 100000;
        const auto t = run(p, noise, s, rc, 1.0);
        const double final_z = t.x_hat_sq.back() + t.y_hat_sq.back();
        const bool ok = !t.diverged && final_z <= 1e-6;
        o.pass = o.pass && ok;
        o.detail += std::string(name) + " final z=" + fmt(final_z) + "; ";
    }
    return o;
}

// ---------------------------------------------------------------------------
// 5. Balancing identity at a = 2/3, b = 1.
Outcome criterion5() {
    const auto s = make_schedule(1.7, 0.3, 2.0 / 3.0, 1.0, 1);
    const auto [a0, b0] = step_sizes(s, 0);
    const double c0 = (a0 * b0) / (b0 * b0 * b0 / (a0 * a0));
    double worst = 0.0;
    for (long long k = 0; k <= 1000000; ++k) {
        const auto [ak, bk] = step_sizes(s, k);
        const double ck = (ak * bk) / (bk * bk * bk / (ak * ak));
        worst = std::max(worst, std::abs(ck - c0) / std::abs(c0));
    }
    Outcome o;
    o.pass = worst <= 1e-12;
    o.detail = "max relative drift of (alpha beta)/(beta^3/alpha^2) over k<=1e6: " + fmt(worst);
    return o;
}

// ---------------------------------------------------------------------------
// 6. ODE reference: exponential tracking and time-scale separation.
Outcome criterion6() {
    ParamMap lp;
    lp["a_f"] = {2.0};
    lp["p"] = {1.0};
    lp["a_g"] = {1.0};
    lp["c_c"] = {0.0};
    lp["y_targ"] = {0.0};
    const auto lin = make_builtin("linear-coupled", lp, 1);
    OdeConfig c1;
    c1.epsilon = 0.0;
    c1.h = 1e-4;
    c1.T = 3.0;
    c1.x0 = Vector::Constant(1, 1.0);
    c1.y0 = Vector::Constant(1, 0.0);
    c1.record_stride = 10;
    const auto t1 = integrate(lin, c1);
    double max_err = 0.0;
    for (std::size_t i = 0; i < t1.times.size(); ++i)
        max_err = std::max(max_err, std::abs(t1.fast_residual[i] - std::exp(-2.0 * t1.times[i])));

    const auto p = make_builtin("nonlinear-tanh", {}, 4);
    OdeConfig c2;
    c2.epsilon = 0.01;
    c2.h = 0.01;
    c2.T = 300.0;
    const auto t2 = integrate(p, c2);
    const double t_fast = halving_time(t2.times, t2.fast_residual);
    const double t_slow = halving_time(t2.times, t2.slow_error);

    Outcome o;
    o.pass = max_err <= 1e-3 && t_fast > 0.0 && t_slow >= 10.0 * t_fast;
    o.detail = "exp tracking err=" + fmt(max_err) + " (<=1e-3); halving times fast=" +
               fmt(t_fast) + " slow=" + fmt(t_slow) + " (ratio " + fmt(t_slow / t_fast) + ")";
    return o;
}

// ---------------------------------------------------------------------------
// 7. Assumption verifier at radius 10 with 1e4 samples.
Outcome criterion7() {
    Outcome o;
    o.pass = true;
    for (const char* name : {"linear-coupled", "nonlinear-tanh", "polyak-ruppert"}) {
        const auto p = make_builtin(name, {}, 4);
        const auto r = verify_assumptions(p, 10000, 10.0, kSeed + 7);
        const auto& c = p.constants;
        const bool ok = r.pass && r.max_lipschitz_ratio_F <= c.L_F * (1 + 1e-9) &&
                        r.max_lipschitz_ratio_G <= c.L_G * (1 + 1e-9) &&
                        r.max_lipschitz_ratio_H <= c.L_H * (1 + 1e-9) &&
                        r.min_monotone_quotient_F >= c.mu_F * (1 - 1e-9) &&
                        r.min_monotone_quotient_G >= c.mu_G * (1 - 1e-9);
        o.pass = o.pass && ok;
        o.detail += std::string(name) + (ok ? " ok; " : " VIOLATED; ");
    }
    return o;
}

// ---------------------------------------------------------------------------
// 8. Determinism of every command, including parallel replications.
int run_cli(const std::string& command, const std::string& config_path) {
    const std::string cmd = std::string(TTSA_CLI_PATH) + " " + command + " -c " + config_path +
                            " >/dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome criterion8() {
    Outcome o;
    o.pass = true;
    Json cfg;
    cfg["problem"] = {{"name", "nonlinear-tanh"}, {"dim", 4}, {"params", Json::object()}};
    cfg["noise"] = {{"kind", "isotropic"}, {"sigma_xi", 0.1}, {"sigma_psi", 0.1},
                    {"rho_cross", 0.0}, {"seed", kSeed}};
    cfg["schedule"] = {{"auto_tune", {{"beta0", 0.05}, {"safety", 0.9}}}};
    cfg["run"] = {{"iterations", 5000}, {"replications", 10}, {"threads", 4}};
    cfg["outputs"] = {{"csv_path", "acc8.csv"}, {"json_path", "acc8.json"}};
    cfg["lemmas"] = {{"M", 2000}, {"states", 3}, {"k_indices", {0, 10}},
                     {"traj_replications", 6}, {"traj_iterations", 500}};
    cfg["rate"] = {{"window", {0.1, 1.0}}, {"target", "mean_V"}};
    cfg["ode"] = {{"epsilon", 0.05}, {"h", 0.01}, {"T", 2.0}, {"record_stride", 5}};

    for (const std::string command :
         {"run", "mc", "rate", "verify", "lemmas", "envelope", "ode", "constants"}) {
        Json c = cfg;
        if (command == "envelope") c["schedule"] = {{"envelope_defaults", Json::object()}};
        {
            std::ofstream out("acc8_cfg.json");
            out << c.dump(2);
        }
        const int code1 = run_cli(command, "acc8_cfg.json");
        const std::string csv1 = slurp("acc8.csv"), json1 = slurp("acc8.json");
        const int code2 = run_cli(command, "acc8_cfg.json");
        const bool ok = code1 == code2 && slurp("acc8.csv") == csv1 && slurp("acc8.json") == json1;
        o.pass = o.pass && ok;
        if (!ok) o.detail += command + " NOT reproducible; ";
    }

    // thread count must not change the bytes either
    {
        Json c = cfg;
        c["run"]["threads"] = 1;
        std::ofstream("acc8_cfg.json") << c.dump(2);
        run_cli("mc", "acc8_cfg.json");
        const std::string csv1 = slurp("acc8.csv");
        c["run"]["threads"] = 4;
        std::ofstream("acc8_cfg.json") << c.dump(2);
        run_cli("mc", "acc8_cfg.json");
        const bool ok = slurp("acc8.csv") == csv1;
        o.pass = o.pass && ok;
        if (!ok) o.detail += "mc differs across thread counts; ";
    }
    if (o.detail.empty()) o.detail = "8 commands byte-identical across reruns and thread counts";
    return o;
}

// ---------------------------------------------------------------------------
// 9. Mutation sensitivity of the lemma right-hand sides.
Outcome criterion9() {
    const auto p = make_builtin("nonlinear-tanh", {}, 4);
    const auto noise = isotropic_noise(4, 0.1, 0.1, 0.0);
    const auto g = gammas(noise);
    const auto s = tuned_schedule("nonlinear-tanh", p.constants);
    LemmaCheckConfig cfg;
    cfg.M = 20000;
    cfg.seed = kSeed + 9;
    cfg.traj_replications = 10;
    cfg.traj_iterations = 1000;

    auto count_failures = [&](const ProblemConstants& mutated) {
        const auto dc = derive_constants(mutated, s, g);
        const auto report = check_lemmas(p, noise, s, mutated, dc, {}, cfg);
        int failed = 0;
        for (const auto& c : report.checks)
            if (!c.pass) ++failed;
        return failed;
    };

    ProblemConstants mu_up = p.constants;
    mu_up.mu_F *= 2.0;
    const int fail_mu = count_failures(mu_up);

    ProblemConstants lg_down = p.constants;
    lg_down.L_G *= 0.5;
    const int fail_lg = count_failures(lg_down);

    Outcome o;
    o.pass = (fail_mu + fail_lg) >= 1;
    o.detail = "mu_F doubled -> " + std::to_string(fail_mu) + " failing checks; L_G halved -> " +
               std::to_string(fail_lg) + " failing checks";
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--criterion" && i + 1 < argc) selected.push_back(atoi(argv[++i]));
    }
    if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};

    Outcome (*criteria[])() = {criterion1, criterion2, criterion3, criterion4, criterion5,
                               criterion6, criterion7, criterion8, criterion9};
    const char* names[] = {
        "rate reproduction (mean_V slope on nonlinear-tanh)",
        "lemma suite (one-step bounds + uniform bound, all builtins)",
        "envelope (measured mean_V below the corrected bound)",
        "noise-free convergence to 1e-6 by k = 1e5",
        "balancing identity of the schedule exponents",
        "ODE reference (exponential tracking, time-scale split)",
        "assumption verifier (sampled quotients vs declared constants)",
        "determinism (byte-identical reruns, thread-independent)",
        "mutation sensitivity of the lemma bounds",
    };

    int failures = 0;
    for (int idx : selected) {
        if (idx < 1 || idx > 9) {
            std::fprintf(stderr, "unknown criterion %d\n", idx);
            return 64;
        }
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[idx - 1]();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %d [%s]: %s (%.1fs) — %s\n", idx, names[idx - 1],
                    o.pass ? "PASS" : "FAIL", secs, o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    return failures;
}
