#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ttsa/errors.hpp"
#include "ttsa/rng.hpp"

namespace ttsa {

using Vector = Eigen::VectorXd;

/// Declared smoothness and monotonicity constants of a coupled operator pair:
/// H is L_H-Lipschitz, F(.,y) is L_F-Lipschitz and mu_F-strongly monotone in x,
/// G is jointly L_G-Lipschitz (sum-of-norms form) and one-point mu_G-strongly
/// monotone at y* along (H(y), y).
struct ProblemConstants {
    double L_F = 0.0;
    double L_G = 0.0;
    double L_H = 0.0;
    double mu_F = 0.0;
    double mu_G = 0.0;
};

/// A coupled root-finding problem: find (x*, y*) with F(x*,y*) = 0 and
/// G(x*,y*) = 0, where x = H(y) is the unique root of F(., y) for each y.
/// Immutable after construction; safe to share read-only across threads.
struct ProblemSpec {
    int dim = 0;
    std::string name;
    std::function<Vector(const Vector&, const Vector&)> eval_F;
    std::function<Vector(const Vector&, const Vector&)> eval_G;
    std::function<Vector(const Vector&)> eval_H;
    Vector x_star;
    Vector y_star;
    ProblemConstants constants;
};

/// Residual variables: x_hat = x - H(y) (distance to the fast equilibrium)
/// and y_hat = y - y* (slow error).
struct Residuals {
    Vector x_hat;
    Vector y_hat;
};

/// Sampled evidence for the smoothness/monotonicity assumptions.
struct AssumptionReport {
    double max_lipschitz_ratio_F = 0.0;
    double max_lipschitz_ratio_G = 0.0;
    double max_lipschitz_ratio_H = 0.0;
    double min_monotone_quotient_F = 0.0;
    double min_monotone_quotient_G = 0.0;
    double max_root_residual = 0.0;
    long long sample_count = 0;
    bool pass = false;
};

/// Builtin parameters: scalar values broadcast to all coordinates, vectors
/// must have length dim. Diagonal matrices are given by their diagonal.
using ParamMap = std::map<std::string, std::vector<double>>;

namespace detail {

inline Vector param_vector(const ParamMap& params, const std::string& key, int dim,
                           double fallback) {
    auto it = params.find(key);
    if (it == params.end()) return Vector::Constant(dim, fallback);
    const auto& v = it->second;
    if (v.size() == 1) return Vector::Constant(dim, v[0]);
    if (static_cast<int>(v.size()) != dim)
        throw ConfigError("parameter '" + key + "' must be scalar or length " +
                          std::to_string(dim));
    return Eigen::Map<const Vector>(v.data(), dim);
}

inline double param_scalar(const ParamMap& params, const std::string& key, double fallback) {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    if (it->second.size() != 1)
        throw ConfigError("parameter '" + key + "' must be a scalar");
    return it->second[0];
}

inline void reject_unknown_params(const ParamMap& params,
                                  const std::vector<std::string>& allowed) {
    for (const auto& [key, value] : params) {
        bool known = false;
        for (const auto& a : allowed)
            if (key == a) known = true;
        if (!known) throw ConfigError("unknown problem parameter '" + key + "'");
    }
}

/// Uniform draw from the closed ball of given radius around `center`.
inline Vector sample_in_ball(RngState& rng, const Vector& center, double radius) {
    Vector dir(center.size());
    double norm = 0.0;
    do {
        fill_standard_normals(rng, dir);
        norm = dir.norm();
    } while (norm < 1e-300);
    const double r = radius * std::pow(rng.next_unit(), 1.0 / static_cast<double>(center.size()));
    return center + (r / norm) * dir;
}

inline void check_solution_consistency(const ProblemSpec& p) {
    const double tol = 1e-9 * (1.0 + p.y_star.norm() + p.x_star.norm());
    if (p.eval_F(p.x_star, p.y_star).norm() > tol)
        throw std::logic_error("builtin inconsistent: F(x*,y*) != 0");
    if (p.eval_G(p.x_star, p.y_star).norm() > tol)
        throw std::logic_error("builtin inconsistent: G(x*,y*) != 0");
    if ((p.x_star - p.eval_H(p.y_star)).norm() > tol)
        throw std::logic_error("builtin inconsistent: x* != H(y*)");
    const auto& c = p.constants;
    if (!(c.mu_F > 0.0) || !(c.mu_G > 0.0) || c.mu_F > c.L_F || c.mu_G > c.L_G ||
        !std::isfinite(c.L_F + c.L_G + c.L_H))
        throw std::logic_error("builtin inconsistent: constants out of range");
}

}  // namespace detail

/// Constructs one of the builtin test problems. All constants are exact for
/// the instance (Lipschitz bounds may be conservative, never invalid).
///
///   linear-coupled : F = a_f.*(x - p.*y), G = a_g.*(y - y_targ) + c_c.*(x - p.*y)
///   nonlinear-tanh : H(y) = gamma*tanh(y), F = x - H(y),
///                    G = mu*(y - y_targ) + rho*(x - H(y))
///   polyak-ruppert : F = x - y (iterate averaging), G = q.*y
inline ProblemSpec make_builtin(const std::string& name, const ParamMap& params, int dim) {
    if (dim < 1) throw ConfigError("dim must be >= 1");
    ProblemSpec p;
    p.dim = dim;
    p.name = name;

    if (name == "linear-coupled") {
        detail::reject_unknown_params(params, {"a_f", "a_g", "p", "c_c", "y_targ"});
        const Vector a_f = detail::param_vector(params, "a_f", dim, 2.0);
        const Vector a_g = detail::param_vector(params, "a_g", dim, 1.0);
        const Vector pm = detail::param_vector(params, "p", dim, 1.0);
        const Vector c_c = detail::param_vector(params, "c_c", dim, 0.0);
        const Vector y_targ = detail::param_vector(params, "y_targ", dim, 1.0);
        if (a_f.minCoeff() <= 0.0 || a_g.minCoeff() <= 0.0)
            throw ConfigError("linear-coupled: a_f and a_g must be positive definite");

        p.eval_H = [pm](const Vector& y) -> Vector { return pm.cwiseProduct(y); };
        p.eval_F = [a_f, pm](const Vector& x, const Vector& y) -> Vector {
            return a_f.cwiseProduct(x - pm.cwiseProduct(y));
        };
        p.eval_G = [a_g, c_c, pm, y_targ](const Vector& x, const Vector& y) -> Vector {
            return a_g.cwiseProduct(y - y_targ) + c_c.cwiseProduct(x - pm.cwiseProduct(y));
        };
        p.y_star = y_targ;
        p.x_star = pm.cwiseProduct(y_targ);
        const double cmax = c_c.cwiseAbs().maxCoeff();
        const double pmax = pm.cwiseAbs().maxCoeff();
        p.constants = {a_f.maxCoeff(), std::max(cmax, a_g.maxCoeff() + cmax * pmax), pmax,
                       a_f.minCoeff(), a_g.minCoeff()};
    } else if (name == "nonlinear-tanh") {
        detail::reject_unknown_params(params, {"gamma", "mu", "rho", "y_targ"});
        const double gamma = detail::param_scalar(params, "gamma", 0.5);
        const double mu = detail::param_scalar(params, "mu", 1.0);
        const double rho = detail::param_scalar(params, "rho", 0.5);
        const Vector y_targ = detail::param_vector(params, "y_targ", dim, 1.0);
        if (gamma <= 0.0) throw ConfigError("nonlinear-tanh: gamma must be positive");
        if (mu <= 0.0 || rho < 0.0)
            throw ConfigError("nonlinear-tanh: mu must be positive and rho nonnegative");

        p.eval_H = [gamma](const Vector& y) -> Vector {
            return gamma * y.array().tanh().matrix();
        };
        auto H = p.eval_H;
        p.eval_F = [H](const Vector& x, const Vector& y) -> Vector { return x - H(y); };
        p.eval_G = [H, mu, rho, y_targ](const Vector& x, const Vector& y) -> Vector {
            return mu * (y - y_targ) + rho * (x - H(y));
        };
        p.y_star = y_targ;
        p.x_star = p.eval_H(y_targ);
        p.constants = {1.0, std::max(mu, rho) * (1.0 + gamma), gamma, 1.0, mu};
    } else if (name == "polyak-ruppert") {
        detail::reject_unknown_params(params, {"q"});
        Vector q;
        if (params.count("q")) {
            q = detail::param_vector(params, "q", dim, 1.0);
        } else {
            q.resize(dim);
            for (int i = 0; i < dim; ++i) q[i] = static_cast<double>(i + 1) / dim;
        }
        if (q.minCoeff() <= 0.0)
            throw ConfigError("polyak-ruppert: q must be positive definite");

        p.eval_H = [](const Vector& y) -> Vector { return y; };
        p.eval_F = [](const Vector& x, const Vector& y) -> Vector { return x - y; };
        p.eval_G = [q](const Vector&, const Vector& y) -> Vector { return q.cwiseProduct(y); };
        p.x_star = Vector::Zero(dim);
        p.y_star = Vector::Zero(dim);
        p.constants = {1.0, q.maxCoeff(), 1.0, 1.0, q.minCoeff()};
    } else {
        throw ConfigError("unknown builtin problem '" + name + "'");
    }

    detail::check_solution_consistency(p);
    return p;
}

inline Residuals residuals(const ProblemSpec& problem, const Vector& x, const Vector& y) {
    if (x.size() != problem.dim || y.size() != problem.dim)
        throw ConfigError("residuals: dimension mismatch");
    return {x - problem.eval_H(y), y - problem.y_star};
}

/// Samples difference quotients in the ball of given radius around the
/// solution and checks them against the declared constants. Lipschitz ratios
/// must not exceed the constant by more than relative slack 1e-9, monotone
/// quotients must not fall below the modulus by more than the same slack, and
/// every sampled y must satisfy ||F(H(y), y)|| <= 1e-8 * (1 + ||y||).
/// The monotonicity quotient for G is evaluated along (H(y), y) pairs only.
/// Deterministic for a fixed seed.
inline AssumptionReport verify_assumptions(const ProblemSpec& problem, long long samples,
                                           double radius, std::uint64_t seed) {
    if (samples < 2) throw ConfigError("verify_assumptions: samples must be >= 2");
    if (!(radius > 0.0)) throw ConfigError("verify_assumptions: radius must be positive");

    RngState rng(seed);
    AssumptionReport r;
    r.sample_count = samples;
    r.min_monotone_quotient_F = std::numeric_limits<double>::infinity();
    r.min_monotone_quotient_G = std::numeric_limits<double>::infinity();
    bool root_ok = true;

    for (long long s = 0; s < samples; ++s) {
        const Vector y1 = detail::sample_in_ball(rng, problem.y_star, radius);
        const Vector y2 = detail::sample_in_ball(rng, problem.y_star, radius);
        const Vector x1 = detail::sample_in_ball(rng, problem.x_star, radius);
        const Vector x2 = detail::sample_in_ball(rng, problem.x_star, radius);

        const double dy = (y1 - y2).norm();
        const double dx = (x1 - x2).norm();

        if (dy > 1e-12) {
            r.max_lipschitz_ratio_H = std::max(
                r.max_lipschitz_ratio_H, (problem.eval_H(y1) - problem.eval_H(y2)).norm() / dy);
        }
        if (dx > 1e-12) {
            const Vector dF = problem.eval_F(x1, y1) - problem.eval_F(x2, y1);
            r.max_lipschitz_ratio_F = std::max(r.max_lipschitz_ratio_F, dF.norm() / dx);
            r.min_monotone_quotient_F =
                std::min(r.min_monotone_quotient_F, (x1 - x2).dot(dF) / (dx * dx));
        }
        if (dx + dy > 1e-12) {
            r.max_lipschitz_ratio_G =
                std::max(r.max_lipschitz_ratio_G,
                         (problem.eval_G(x1, y1) - problem.eval_G(x2, y2)).norm() / (dx + dy));
        }
        const Vector yh = y1 - problem.y_star;
        const double yh2 = yh.squaredNorm();
        if (yh2 > 1e-24) {
            r.min_monotone_quotient_G = std::min(
                r.min_monotone_quotient_G, yh.dot(problem.eval_G(problem.eval_H(y1), y1)) / yh2);
        }
        const double root = problem.eval_F(problem.eval_H(y1), y1).norm();
        r.max_root_residual = std::max(r.max_root_residual, root);
        if (root > 1e-8 * (1.0 + y1.norm())) root_ok = false;
    }

    const auto& c = problem.constants;
    const double slack = 1e-9;
    r.pass = root_ok && r.max_lipschitz_ratio_F <= c.L_F * (1.0 + slack) &&
             r.max_lipschitz_ratio_G <= c.L_G * (1.0 + slack) &&
             r.max_lipschitz_ratio_H <= c.L_H * (1.0 + slack) &&
             r.min_monotone_quotient_F >= c.mu_F * (1.0 - slack) &&
             r.min_monotone_quotient_G >= c.mu_G * (1.0 - slack);
    return r;
}

}  // namespace ttsa
