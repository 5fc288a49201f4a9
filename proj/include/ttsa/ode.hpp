#pragma once

#include <cmath>
#include <vector>

#include "ttsa/errors.hpp"
#include "ttsa/operators.hpp"

namespace ttsa {

/// Deterministic reference for the singularly perturbed limit
///   dx/dt = -F(x, y),   dy/dt = -epsilon * G(x, y)
/// with epsilon the slow/fast ratio. epsilon = 0 freezes y (decoupled fast
/// system). Explicit Euler with a stability guard; a validation aid, not a
/// stiff solver.
struct OdeConfig {
    double epsilon = 0.01;
    double h = 1e-3;
    double T = 10.0;
    Vector x0, y0;  // empty: default initializer x* + 1, y* + 1
    long long record_stride = 1;
};

struct OdeTrajectory {
    std::vector<double> times;
    std::vector<double> fast_residual;  // ||x(t) - H(y(t))||
    std::vector<double> slow_error;     // ||y(t) - y*||
};

inline OdeTrajectory integrate(const ProblemSpec& problem, const OdeConfig& cfg) {
    if (!(cfg.epsilon >= 0.0) || cfg.epsilon > 1.0)
        throw ConfigError("ode: epsilon must be in [0, 1]");
    if (!(cfg.h > 0.0) || cfg.h > cfg.T) throw ConfigError("ode: need 0 < h <= T");
    if (cfg.record_stride < 1) throw ConfigError("ode: record_stride must be >= 1");
    const double rate = std::max(problem.constants.L_F, cfg.epsilon * problem.constants.L_G);
    if (cfg.h > 0.1 / rate)
        throw ConfigError("ode: step size violates the stability guard h <= 0.1 / max(L_F, eps*L_G)");

    Vector x = cfg.x0.size() ? cfg.x0 : Vector(problem.x_star + Vector::Ones(problem.dim));
    Vector y = cfg.y0.size() ? cfg.y0 : Vector(problem.y_star + Vector::Ones(problem.dim));
    if (x.size() != problem.dim || y.size() != problem.dim)
        throw ConfigError("ode: x0/y0 dimension mismatch");

    const auto steps = static_cast<long long>(std::llround(cfg.T / cfg.h));
    OdeTrajectory t;
    auto record = [&](long long i) {
        t.times.push_back(i * cfg.h);
        t.fast_residual.push_back((x - problem.eval_H(y)).norm());
        t.slow_error.push_back((y - problem.y_star).norm());
    };
    for (long long i = 0; i <= steps; ++i) {
        if (i % cfg.record_stride == 0 || i == steps) record(i);
        if (i == steps) break;
        const Vector fx = problem.eval_F(x, y);
        const Vector gy = problem.eval_G(x, y);
        x -= cfg.h * fx;
        y -= (cfg.h * cfg.epsilon) * gy;
        for (Eigen::Index j = 0; j < x.size(); ++j)
            if (!std::isfinite(x[j]) || !std::isfinite(y[j]) || std::abs(x[j]) > 1e12 ||
                std::abs(y[j]) > 1e12)
                throw DivergenceError("ode trajectory diverged at t = " + std::to_string(i * cfg.h),
                                      i, -1);
    }
    return t;
}

/// First time at which `values` drops to half its initial value, or -1 if it
/// never does. Used to compare fast and slow relaxation scales.
inline double halving_time(const std::vector<double>& times, const std::vector<double>& values) {
    if (values.empty()) return -1.0;
    const double target = values.front() / 2.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] <= target) return times[i];
    return -1.0;
}

}  // namespace ttsa
