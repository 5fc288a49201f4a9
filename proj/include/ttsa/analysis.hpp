#pragma once

#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "ttsa/errors.hpp"
#include "ttsa/noise.hpp"
#include "ttsa/operators.hpp"
#include "ttsa/schedules.hpp"
#include "ttsa/solver.hpp"

namespace ttsa {

/// Empirical conditional means of the one-step quantities given a fixed
/// current state: ||x_hat_{k+1}||^2, ||y_hat_{k+1}||^2 and their sum z_{k+1},
/// each with a standard error over M fresh-noise draws.
struct OneStepEstimate {
    double mean_xhat_sq_next = 0.0, se_xhat_sq = 0.0;
    double mean_yhat_sq_next = 0.0, se_yhat_sq = 0.0;
    double mean_z_next = 0.0, se_z = 0.0;
    long long draws = 0;
};

inline OneStepEstimate empirical_onestep(const ProblemSpec& problem, const NoiseModel& noise,
                                         const StepSchedule& schedule, const IterateState& state,
                                         long long M, std::uint64_t seed,
                                         double divergence_threshold = 1e12) {
    if (M < 1000) throw ConfigError("empirical_onestep: need M >= 1000 draws");
    RngState rng(seed);

    // Welford accumulation in draw order: deterministic and cancellation-safe.
    // Each draw consumes the next 2*dim raws of the stream, so the M single
    // steps see independent fresh noise.
    double m_x = 0.0, s_x = 0.0, m_y = 0.0, s_y = 0.0, m_z = 0.0, s_z = 0.0;
    for (long long i = 0; i < M; ++i) {
        const IterateState next =
            step(state, problem, noise, schedule, rng, divergence_threshold);
        const Residuals res = residuals(problem, next.x, next.y);
        const double xs = res.x_hat.squaredNorm();
        const double ys = res.y_hat.squaredNorm();
        const double zs = xs + ys;
        const double n = static_cast<double>(i + 1);
        const double dx = xs - m_x;
        m_x += dx / n;
        s_x += dx * (xs - m_x);
        const double dy = ys - m_y;
        m_y += dy / n;
        s_y += dy * (ys - m_y);
        const double dz = zs - m_z;
        m_z += dz / n;
        s_z += dz * (zs - m_z);
    }
    const double Md = static_cast<double>(M);
    OneStepEstimate e;
    e.draws = M;
    e.mean_xhat_sq_next = m_x;
    e.mean_yhat_sq_next = m_y;
    e.mean_z_next = m_z;
    e.se_xhat_sq = std::sqrt(s_x / (Md - 1.0)) / std::sqrt(Md);
    e.se_yhat_sq = std::sqrt(s_y / (Md - 1.0)) / std::sqrt(Md);
    e.se_z = std::sqrt(s_z / (Md - 1.0)) / std::sqrt(Md);
    return e;
}

enum class LemmaId { lemma1, lemma2, lemma3a, lemma3b };

inline std::string to_string(LemmaId id) {
    switch (id) {
        case LemmaId::lemma1: return "1";
        case LemmaId::lemma2: return "2";
        case LemmaId::lemma3a: return "3a";
        case LemmaId::lemma3b: return "3b";
    }
    return "?";
}

/// Evaluates the cited one-step right-hand side term by term.
///   lemma1 : bound on E||x_hat_{k+1}||^2 given the state
///   lemma2 : bound on E||y_hat_{k+1}||^2
///   lemma3a: bound on E[z_{k+1}], z = ||x_hat||^2 + ||y_hat||^2
///   lemma3b: the uniform bound C (state-independent)
inline double lemma_rhs(LemmaId id, double xhat_sq, double yhat_sq, double z, long long k,
                        const StepSchedule& s, const DerivedConstants& dc,
                        const ProblemConstants& pc, const Gammas& g) {
    const auto [alpha, beta] = step_sizes(s, k);
    const double LH = pc.L_H, LG = pc.L_G;
    switch (id) {
        case LemmaId::lemma1: {
            const double lh1sq = (LH + 1.0) * (LH + 1.0);
            return (1.0 - 2.0 * pc.mu_F * alpha) * xhat_sq + g.g22 * beta * beta +
                   g.g11 * alpha * alpha + dc.L1 * g.g22 / dc.eta_x * beta * beta / alpha +
                   2.0 * LH * LH * LG * LG * lh1sq * beta * beta * yhat_sq +
                   LH * LH * (2.0 * LG * LG + 1.0) * alpha * alpha * xhat_sq +
                   dc.L1 * lh1sq * beta * beta / (dc.eta_x * alpha) * yhat_sq +
                   2.0 * dc.L1 * (beta + dc.eta_x * alpha) * xhat_sq;
        }
        case LemmaId::lemma2:
            return (1.0 - pc.mu_G * beta) * yhat_sq + g.g22 * beta * beta +
                   dc.L2 * dc.L2 / pc.mu_G * beta * xhat_sq +
                   LG * LG * (1.0 + 2.0 * LH * LH) * beta * beta * (xhat_sq + yhat_sq);
        case LemmaId::lemma3a: {
            const double lh1_4 = std::pow(LH + 1.0, 4);
            return (1.0 - dc.mu * beta + 4.0 * LG * LG * lh1_4 * alpha * alpha) * z +
                   2.0 * beta * beta * g.g22 + alpha * alpha * g.g11 +
                   dc.L1 / dc.eta_x * beta * beta / alpha * g.g22;
        }
        case LemmaId::lemma3b:
            return dc.C;
    }
    throw ConfigError("lemma_rhs: unknown lemma id");
}

/// One comparison of an empirical conditional mean against a lemma
/// right-hand side, passed under the one-sided rule
///   lhs_mean <= rhs + se_slack * lhs_se.
struct LemmaCheck {
    std::string lemma_id;
    int state_id = 0;  // -1 for the trajectory-based 3b checks
    long long k = 0;
    double lhs_mean = 0.0;
    double lhs_se = 0.0;
    double rhs = 0.0;
    bool pass = false;
};

struct LemmaReport {
    std::vector<LemmaCheck> checks;
    bool pass = false;
};

struct LemmaCheckConfig {
    long long M = 100000;
    int n_states = 20;
    std::vector<double> radii = {0.1, 1.0, 10.0};
    std::vector<long long> k_indices = {0, 10, 100, 1000, 10000};
    std::uint64_t seed = 0;
    double se_slack = 3.0;
    int traj_replications = 100;
    long long traj_iterations = 10000;
    int threads = 0;
};

/// Default grid: n_states random states with radii cycling through
/// cfg.radii, drawn around the solution.
inline std::vector<IterateState> default_lemma_states(const ProblemSpec& problem,
                                                      const LemmaCheckConfig& cfg) {
    std::vector<IterateState> states;
    states.reserve(cfg.n_states);
    for (int i = 0; i < cfg.n_states; ++i) {
        RngState rng(mix64(cfg.seed, 0x5747u + i));
        const double radius = cfg.radii[i % cfg.radii.size()];
        IterateState st;
        st.k = 0;
        st.x = detail::sample_in_ball(rng, problem.x_star, radius);
        st.y = detail::sample_in_ball(rng, problem.y_star, radius);
        states.push_back(std::move(st));
    }
    return states;
}

/// Checks Lemmas 1, 2 and 3a at every (state, k) pair and Lemma 3b along
/// full trajectories. `pc`/`dc` are passed separately from the problem so
/// test fixtures can inject corrupted constants into the right-hand sides
/// while the dynamics stay true.
inline LemmaReport check_lemmas(const ProblemSpec& problem, const NoiseModel& noise,
                                const StepSchedule& schedule, const ProblemConstants& pc,
                                const DerivedConstants& dc, std::vector<IterateState> states,
                                const LemmaCheckConfig& cfg) {
    if (!check_conditions(pc, schedule, dc).pass)
        throw InfeasibleError("check_lemmas: schedule fails the step-size conditions");
    if (states.empty()) states = default_lemma_states(problem, cfg);
    const Gammas g = gammas(noise);

    struct Pair {
        int state_id;
        long long k;
    };
    std::vector<Pair> pairs;
    for (int si = 0; si < static_cast<int>(states.size()); ++si)
        for (long long k : cfg.k_indices) pairs.push_back({si, k});

    std::vector<std::array<LemmaCheck, 3>> results(pairs.size());
    auto eval_pair = [&](std::size_t pi) {
        const auto& [si, k] = pairs[pi];
        IterateState st = states[si];
        st.k = k;
        const Residuals res = residuals(problem, st.x, st.y);
        const double xs = res.x_hat.squaredNorm();
        const double ys = res.y_hat.squaredNorm();
        const double z = xs + ys;
        const OneStepEstimate est =
            empirical_onestep(problem, noise, schedule, st, cfg.M, mix64(cfg.seed, pi));
        auto make = [&](LemmaId id, double lhs, double se) {
            const double rhs = lemma_rhs(id, xs, ys, z, k, schedule, dc, pc, g);
            return LemmaCheck{to_string(id), si,  k, lhs, se, rhs,
                              lhs <= rhs + cfg.se_slack * se};
        };
        results[pi] = {make(LemmaId::lemma1, est.mean_xhat_sq_next, est.se_xhat_sq),
                       make(LemmaId::lemma2, est.mean_yhat_sq_next, est.se_yhat_sq),
                       make(LemmaId::lemma3a, est.mean_z_next, est.se_z)};
    };

    int threads = cfg.threads;
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min<int>(threads, static_cast<int>(pairs.size())));
    if (threads == 1) {
        for (std::size_t pi = 0; pi < pairs.size(); ++pi) eval_pair(pi);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (pairs.size() + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const std::size_t begin = t * chunk;
            const std::size_t end_ = std::min(pairs.size(), begin + chunk);
            if (begin < end_)
                pool.emplace_back([&, begin, end_] {
                    for (std::size_t pi = begin; pi < end_; ++pi) eval_pair(pi);
                });
        }
        for (auto& th : pool) th.join();
    }

    LemmaReport report;
    for (const auto& triple : results)
        for (const auto& c : triple) report.checks.push_back(c);

    // Lemma 3b: mean z_k along full trajectories never exceeds the uniform
    // bound C computed from the realized initial state.
    {
        RunConfig rc;
        rc.iterations = cfg.traj_iterations;
        rc.seed = mix64(cfg.seed, 0x3bu);
        ReplicationSummary sum = monte_carlo(problem, noise, schedule, rc,
                                             cfg.traj_replications, dc.eta, cfg.threads);
        const DerivedConstants dz =
            derive_constants(pc, schedule, g, sum.z0, dc.eta_x, EtaVariant::theorem);
        for (std::size_t j = 0; j < sum.ks.size(); ++j) {
            const double lhs = sum.mean_xhat_sq[j] + sum.mean_yhat_sq[j];
            const double se = sum.se_xhat_sq[j] + sum.se_yhat_sq[j];
            report.checks.push_back({to_string(LemmaId::lemma3b), -1, sum.ks[j], lhs, se, dz.C,
                                     lhs <= dz.C + cfg.se_slack * se});
        }
    }

    report.pass = true;
    for (const auto& c : report.checks) report.pass = report.pass && c.pass;
    return report;
}

struct EnvelopeCheck {
    long long k = 0;
    double measured = 0.0;
    double se = 0.0;
    double bound_literal = 0.0;
    double bound_corrected = 0.0;
    double margin = 0.0;  // selected bound minus measured
    bool pass = false;
};

struct EnvelopeReport {
    std::vector<EnvelopeCheck> checks;
    BoundVariant variant = BoundVariant::corrected;
    bool pass = false;
};

/// Compares measured mean_V against the closed-form envelope at every
/// recorded k, with one-sided statistical slack. The summary must have been
/// produced under the envelope schedule template (a = 2/3, b = 1,
/// beta0 = 1/mu_G).
inline EnvelopeReport envelope_check(const ReplicationSummary& summary,
                                     const DerivedConstants& dc, const ProblemConstants& pc,
                                     const Gammas& g, double V0,
                                     BoundVariant variant = BoundVariant::corrected,
                                     double se_slack = 3.0) {
    if (!is_envelope_schedule(summary.schedule, pc))
        throw ConfigError(
            "envelope_check: summary was not produced under the a=2/3, b=1, beta0=1/mu_G schedule");
    EnvelopeReport r;
    r.variant = variant;
    r.pass = true;
    for (std::size_t j = 0; j < summary.ks.size(); ++j) {
        EnvelopeCheck c;
        c.k = summary.ks[j];
        c.measured = summary.mean_V[j];
        c.se = summary.se_V[j];
        c.bound_literal =
            envelope_bound(c.k, dc, pc, summary.schedule, g, V0, BoundVariant::literal);
        c.bound_corrected =
            envelope_bound(c.k, dc, pc, summary.schedule, g, V0, BoundVariant::corrected);
        const double bound = variant == BoundVariant::literal ? c.bound_literal : c.bound_corrected;
        c.margin = bound - c.measured;
        c.pass = c.measured <= bound + se_slack * c.se;
        r.pass = r.pass && c.pass;
        r.checks.push_back(c);
    }
    return r;
}

}  // namespace ttsa
