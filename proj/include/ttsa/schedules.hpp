#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ttsa/errors.hpp"
#include "ttsa/noise.hpp"
#include "ttsa/operators.hpp"

namespace ttsa {

/// Polynomially decaying step-size pair
///   alpha_k = alpha0 / (k + offset)^a,   beta_k = beta0 / (k + offset)^b
/// with 1/2 < a < b <= 1, 2b - a > 1 and beta0 <= alpha0.
struct StepSchedule {
    double alpha0 = 1.0;
    double beta0 = 1.0;
    double a = 2.0 / 3.0;
    double b = 1.0;
    long long offset = 1;
};

inline StepSchedule make_schedule(double alpha0, double beta0, double a, double b,
                                  long long offset = 1) {
    if (!(alpha0 > 0.0) || !(beta0 > 0.0))
        throw ConfigError("schedule: alpha0 and beta0 must be positive");
    if (beta0 > alpha0) throw ConfigError("schedule: beta0 must not exceed alpha0");
    if (!(a > 0.5)) throw ConfigError("schedule: need a > 1/2");
    if (!(a < b)) throw ConfigError("schedule: need a < b");
    if (!(b <= 1.0)) throw ConfigError("schedule: need b <= 1");
    if (!(2.0 * b - a > 1.0)) throw ConfigError("schedule: need 2b - a > 1");
    if (offset < 1) throw ConfigError("schedule: offset must be >= 1");
    return {alpha0, beta0, a, b, offset};
}

inline std::pair<double, double> step_sizes(const StepSchedule& s, long long k) {
    const double base = static_cast<double>(k + s.offset);
    return {s.alpha0 / std::pow(base, s.a), s.beta0 / std::pow(base, s.b)};
}

enum class EtaVariant { theorem, proof };
enum class BoundVariant { literal, corrected };

/// Constants derived from the problem constants and a schedule.
///   L1 = L_H L_G (1 + L_H alpha0)
///   L2 = L_G^2 (1 + 2(L_H + 1)) beta0
///   eta_x <= mu_F / (3 L1), eta = 3 L2^2 / (2 mu_G mu_F) ("theorem" variant)
///   or eta = 3 L2 / (2 mu_F) ("proof" variant)
/// C1, C2 and the uniform second-moment bound C depend additionally on the
/// noise summaries and on z0 = ||x_hat_0||^2 + ||y_hat_0||^2 from the actual
/// initial state. C carries exponential factors and may overflow to +inf for
/// large alpha0 or constants; comparisons against it stay well defined.
struct DerivedConstants {
    double L1 = 0.0;
    double L2 = 0.0;
    double L = 0.0;
    double eta_x = 0.0;
    double eta = 0.0;
    double mu = 0.0;
    double C1 = 0.0;
    double C2 = 0.0;
    double C = 0.0;
};

inline DerivedConstants derive_constants(const ProblemConstants& pc, const StepSchedule& s,
                                         const Gammas& g = {}, double z0 = 0.0,
                                         std::optional<double> eta_x_override = {},
                                         EtaVariant eta_variant = EtaVariant::theorem) {
    if (!(s.a > 0.5)) throw ConfigError("derive_constants: a <= 1/2 makes C1 divergent");
    DerivedConstants dc;
    dc.L1 = pc.L_H * pc.L_G * (1.0 + pc.L_H * s.alpha0);
    dc.L2 = pc.L_G * pc.L_G * (1.0 + 2.0 * (pc.L_H + 1.0)) * s.beta0;
    dc.L = std::max({pc.L_H, pc.L_G, pc.L_F});
    dc.mu = std::min(pc.mu_F, pc.mu_G);

    const double eta_x_max = pc.mu_F / (3.0 * dc.L1);
    if (eta_x_override) {
        if (*eta_x_override > eta_x_max * (1.0 + 1e-12))
            throw ConfigError("derive_constants: eta_x override exceeds mu_F / (3 L1)");
        dc.eta_x = std::min(*eta_x_override, eta_x_max);
    } else {
        dc.eta_x = eta_x_max;
    }
    dc.eta = eta_variant == EtaVariant::theorem
                 ? 3.0 * dc.L2 * dc.L2 / (2.0 * pc.mu_G * pc.mu_F)
                 : 3.0 * dc.L2 / (2.0 * pc.mu_F);

    const double growth = 1.0 + 4.0 * pc.L_G * pc.L_G * std::pow(pc.L_H + 1.0, 4);
    dc.C1 = std::exp(growth * (s.alpha0 * s.alpha0 + 1.0 / (2.0 * s.a - 1.0)));
    dc.C2 = 2.0 * g.g22 * (s.beta0 * s.beta0 * (2.0 * s.b - 1.0) + 1.0) / (2.0 * s.b - 1.0) +
            g.g11 * (s.alpha0 * s.alpha0 * (2.0 * s.a - 1.0) + 1.0) / (2.0 * s.a - 1.0) +
            (dc.L1 * g.g22 / dc.eta_x) * (s.beta0 * s.beta0 * (2.0 * s.b - s.a - 1.0) + s.alpha0) /
                (s.alpha0 * (2.0 * s.b - s.a - 1.0));
    dc.C = dc.C1 * (z0 + dc.C2) * std::exp(growth / (2.0 * s.a - 1.0));
    return dc;
}

/// One clause of the step-size conditions, stated as lhs <= rhs (exponent and
/// ordering clauses are encoded the same way). `extra` marks the
/// beta0 <= mu_G / L2^2 clause, which the displayed conditions omit but the
/// slow-residual contraction argument uses.
struct ConditionRecord {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    bool pass = false;
    bool extra = false;
};

struct FeasibilityReport {
    std::vector<ConditionRecord> conditions;
    bool pass = false;  // conjunction of all clause passes

    const ConditionRecord& operator[](const std::string& name) const {
        for (const auto& c : conditions)
            if (c.name == name) return c;
        throw std::out_of_range("no condition named " + name);
    }
};

inline FeasibilityReport check_conditions(const ProblemConstants& pc, const StepSchedule& s,
                                          const DerivedConstants& dc) {
    FeasibilityReport r;
    const double ratio = s.beta0 / s.alpha0;
    auto add = [&r](std::string name, double lhs, double rhs, bool pass, bool extra = false) {
        r.conditions.push_back({std::move(name), lhs, rhs, pass, extra});
    };
    auto add_le = [&add](std::string name, double lhs, double rhs, bool extra = false) {
        const bool pass = lhs <= rhs;
        add(std::move(name), lhs, rhs, pass, extra);
    };

    add_le("ratio_coupled", ratio,
           2.0 * pc.mu_F * pc.mu_G / (3.0 * (2.0 * dc.L1 * pc.mu_G + dc.L2 * dc.L2)));
    add_le("ratio_eta_x", ratio,
           pc.mu_G * dc.eta_x / (2.0 * dc.L1 * (pc.L_H + 1.0) * (pc.L_H + 1.0)));
    add_le("ratio_slow", ratio, 2.0 * pc.mu_F / (3.0 * (pc.mu_G + 2.0 * dc.L1)));
    add_le("eta_x_max", dc.eta_x, pc.mu_F / (3.0 * dc.L1));
    add("half_lt_a", 0.5, s.a, 0.5 < s.a);                       // strict
    add("a_lt_b", s.a, s.b, s.a < s.b);                          // strict
    add_le("b_le_one", s.b, 1.0);
    add("two_b_minus_a_gt_one", 1.0, 2.0 * s.b - s.a, 2.0 * s.b - s.a > 1.0);  // strict
    add_le("beta0_le_alpha0", s.beta0, s.alpha0);
    add_le("beta0_extra", s.beta0, pc.mu_G / (dc.L2 * dc.L2), true);

    r.pass = true;
    for (const auto& c : r.conditions) r.pass = r.pass && c.pass;
    return r;
}

namespace detail {

/// All clauses with the ratio / extra right-hand sides shrunk by `safety`.
inline bool feasible_at(const ProblemConstants& pc, double alpha0, double beta0, double safety) {
    if (alpha0 < beta0) return false;
    const StepSchedule s{alpha0, beta0, 2.0 / 3.0, 1.0, 1};
    const DerivedConstants dc = derive_constants(pc, s);
    const double ratio = beta0 / alpha0;
    const double c1 =
        2.0 * pc.mu_F * pc.mu_G / (3.0 * (2.0 * dc.L1 * pc.mu_G + dc.L2 * dc.L2));
    const double c2 = pc.mu_G * dc.eta_x / (2.0 * dc.L1 * (pc.L_H + 1.0) * (pc.L_H + 1.0));
    const double c3 = 2.0 * pc.mu_F / (3.0 * (pc.mu_G + 2.0 * dc.L1));
    const double cx = pc.mu_G / (dc.L2 * dc.L2);
    return ratio <= safety * c1 && ratio <= safety * c2 && ratio <= safety * c3 &&
           beta0 <= safety * cx;
}

}  // namespace detail

/// Finds the smallest alpha0 >= beta0 for which every step-size clause holds
/// with margin factor `safety`, under the fixed template a = 2/3, b = 1,
/// offset = 1. L1 grows with alpha0, so clause satisfaction need not be
/// monotone in alpha0; a log-grid scan locates the feasible set and bisection
/// refines its lower edge (the scan is the fallback the monotone case does
/// not need). Throws InfeasibleError when no alpha0 in [beta0, 1e12] works.
inline StepSchedule auto_tune(const ProblemConstants& pc, double beta0, double safety) {
    if (!(beta0 > 0.0)) throw ConfigError("auto_tune: beta0 must be positive");
    if (!(safety > 0.0) || safety > 1.0) throw ConfigError("auto_tune: safety must be in (0, 1]");

    const double lo = beta0, hi = 1e12;
    const int n = 601;
    int first_ok = -1;
    std::vector<double> grid(n);
    for (int i = 0; i < n; ++i) {
        grid[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
        if (first_ok < 0 && detail::feasible_at(pc, grid[i], beta0, safety)) first_ok = i;
    }
    if (first_ok < 0)
        throw InfeasibleError("auto_tune: no feasible alpha0 in [beta0, 1e12]");

    double hi_ok = grid[first_ok];
    if (first_ok == 0) return make_schedule(hi_ok, beta0, 2.0 / 3.0, 1.0, 1);
    double lo_bad = grid[first_ok - 1];
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo_bad * hi_ok);
        if (detail::feasible_at(pc, mid, beta0, safety))
            hi_ok = mid;
        else
            lo_bad = mid;
    }
    return make_schedule(hi_ok, beta0, 2.0 / 3.0, 1.0, 1);
}

/// The envelope's canonical schedule template: a = 2/3, b = 1, beta0 = 1/mu_G.
/// alpha0 defaults to max(beta0, 1/L_F), a stability-scale choice; this helper
/// does not promise that the feasibility clauses hold (for many instances no
/// alpha0 satisfies them at beta0 = 1/mu_G; see check_conditions).
inline StepSchedule envelope_schedule(const ProblemConstants& pc,
                                      std::optional<double> alpha0 = {}) {
    const double beta0 = 1.0 / pc.mu_G;
    const double a0 = alpha0 ? *alpha0 : std::max(beta0, 1.0 / pc.L_F);
    return make_schedule(a0, beta0, 2.0 / 3.0, 1.0, 1);
}

inline bool is_envelope_schedule(const StepSchedule& s, const ProblemConstants& pc) {
    return std::abs(s.a - 2.0 / 3.0) <= 1e-12 && std::abs(s.b - 1.0) <= 1e-12 &&
           std::abs(s.beta0 * pc.mu_G - 1.0) <= 1e-9 && s.offset == 1;
}

/// Closed-form mean-square envelope at iteration k, evaluated term by term.
/// The `literal` variant keeps the extra (k+1)^(-2/3) factor on the Gamma11
/// line exactly as displayed; `corrected` drops it and is therefore the
/// larger, safer bound (literal <= corrected for every k).
inline double envelope_bound(long long k, const DerivedConstants& dc, const ProblemConstants& pc,
                             const StepSchedule& s, const Gammas& g, double V0,
                             BoundVariant variant = BoundVariant::corrected) {
    if (k < 0) throw ConfigError("envelope_bound: k must be >= 0");
    if (V0 < 0.0) throw ConfigError("envelope_bound: V0 must be >= 0");
    if (!is_envelope_schedule(s, pc))
        throw ConfigError("envelope_bound: schedule is not the a=2/3, b=1, beta0=1/mu_G template");

    const double kp1 = static_cast<double>(k) + 1.0;
    const double kp2 = static_cast<double>(k) + 2.0;
    const double muG = pc.mu_G, muF = pc.mu_F;
    const double L = dc.L, L1 = dc.L1, L2 = dc.L2, C = dc.C;
    const double Lp1sq = (L + 1.0) * (L + 1.0);

    const double term_v0 = V0 / kp2;
    const double term_log = (3.0 * C * L2 * L * L * (1.0 + 2.0 * L * L) / (2.0 * muG * muG * muF) +
                             (2.0 * muF + 3.0 * L2) * g.g22 / (2.0 * muG * muG * muF)) *
                            (1.0 + std::log(kp1)) / kp2;
    const double g11_coef = 3.0 * L2 * s.alpha0 * g.g11 / (2.0 * muG * muF);
    const double g11_decay = variant == BoundVariant::literal
                                 ? std::pow(kp1, -2.0 / 3.0) * std::pow(kp2, -2.0 / 3.0)
                                 : std::pow(kp2, -2.0 / 3.0);
    const double term_g11 = g11_coef * g11_decay;
    const double denom = 2.0 * muG * muG * muG * muF * dc.eta_x * s.alpha0 * s.alpha0;
    const double term_g22 = 3.0 * L2 * L1 * g.g22 / denom * std::pow(kp2, -2.0 / 3.0);
    const double term_c = (3.0 * C * L2 * L1 * Lp1sq / denom +
                           4.0 * C * L2 * L * L * L * L * Lp1sq * s.alpha0 / (muG * muF)) *
                          std::pow(kp2, -2.0 / 3.0);
    return term_v0 + term_log + term_g11 + term_g22 + term_c;
}

}  // namespace ttsa
