#pragma once

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "ttsa/errors.hpp"
#include "ttsa/noise.hpp"
#include "ttsa/operators.hpp"
#include "ttsa/schedules.hpp"

namespace ttsa {

struct IterateState {
    long long k = 0;
    Vector x;
    Vector y;
};

/// Per-iteration records at the configured strides. V is the coupled
/// Lyapunov value y_hat_sq + eta * (beta_k/alpha_k) * x_hat_sq with the step
/// sizes of the recorded k.
struct Trajectory {
    std::vector<long long> ks;
    std::vector<double> x_hat_sq, y_hat_sq, V, alpha_k, beta_k;
    bool diverged = false;
    long long diverged_at = -1;
};

/// Across-replication means and standard errors (sample std / sqrt(R)) at
/// shared record points, plus the provenance needed to evaluate bounds.
struct ReplicationSummary {
    std::vector<long long> ks;
    std::vector<double> mean_V, se_V;
    std::vector<double> mean_xhat_sq, se_xhat_sq;
    std::vector<double> mean_yhat_sq, se_yhat_sq;
    std::vector<double> alpha_k, beta_k;
    int replications = 0;
    StepSchedule schedule;
    double eta = 0.0;
    double v0 = 0.0;  // V at k = 0 of the (deterministic) initial state
    double z0 = 0.0;  // x_hat_sq + y_hat_sq at k = 0
};

struct RunConfig {
    long long iterations = 100000;
    long long record_stride = 0;  // 0 selects log-spaced recording
    int points_per_decade = 60;
    std::uint64_t seed = 0;
    Vector x0, y0;  // empty: default initializer x* + 1, y* + 1
    double divergence_threshold = 1e12;
};

inline double lyapunov(double x_hat_sq, double y_hat_sq, long long k, const StepSchedule& s,
                       double eta) {
    if (x_hat_sq < 0.0 || y_hat_sq < 0.0)
        throw ConfigError("lyapunov: squared residuals must be nonnegative");
    const auto [alpha, beta] = step_sizes(s, k);
    return y_hat_sq + eta * (beta / alpha) * x_hat_sq;
}

namespace detail {

inline void check_finite_below(const Vector& v, double threshold, long long k, int replication) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double e = v[i];
        if (!std::isfinite(e) || std::abs(e) > threshold)
            throw DivergenceError("iterate diverged at k = " + std::to_string(k), k, replication);
    }
}

inline std::vector<long long> record_points(const RunConfig& cfg) {
    std::vector<long long> ks;
    ks.push_back(0);
    if (cfg.record_stride > 0) {
        for (long long k = cfg.record_stride; k < cfg.iterations; k += cfg.record_stride)
            ks.push_back(k);
    } else {
        const double step = 1.0 / cfg.points_per_decade;
        for (double e = 0.0;; e += step) {
            const auto k = static_cast<long long>(std::llround(std::pow(10.0, e)));
            if (k >= cfg.iterations) break;
            if (k > ks.back()) ks.push_back(k);
        }
    }
    if (ks.back() != cfg.iterations) ks.push_back(cfg.iterations);
    return ks;
}

}  // namespace detail

/// One synchronous update: F and G both read (x_k, y_k), a single noise pair
/// is drawn, then
///   x' = x - alpha_k (F(x,y) + xi),  y' = y - beta_k (G(x,y) + psi).
inline IterateState step(const IterateState& state, const ProblemSpec& problem,
                         const NoiseModel& noise, const StepSchedule& schedule, RngState& rng,
                         double divergence_threshold = 1e12) {
    const auto [alpha, beta] = step_sizes(schedule, state.k);
    Vector xi, psi;
    sample_pair(noise, rng, xi, psi);
    IterateState next;
    next.k = state.k + 1;
    next.x = state.x - alpha * (problem.eval_F(state.x, state.y) + xi);
    next.y = state.y - beta * (problem.eval_G(state.x, state.y) + psi);
    detail::check_finite_below(next.x, divergence_threshold, next.k, -1);
    detail::check_finite_below(next.y, divergence_threshold, next.k, -1);
    return next;
}

/// Applies `step` cfg.iterations times from (x0, y0), recording at the
/// configured points. Deterministic for a fixed seed. On divergence the
/// partial trajectory is returned with the error mark set.
inline Trajectory run(const ProblemSpec& problem, const NoiseModel& noise,
                      const StepSchedule& schedule, const RunConfig& cfg, double eta) {
    if (cfg.iterations < 1) throw ConfigError("run: iterations must be >= 1");
    if (cfg.points_per_decade < 1) throw ConfigError("run: points_per_decade must be >= 1");

    IterateState st;
    st.k = 0;
    st.x = cfg.x0.size() ? cfg.x0 : Vector(problem.x_star + Vector::Ones(problem.dim));
    st.y = cfg.y0.size() ? cfg.y0 : Vector(problem.y_star + Vector::Ones(problem.dim));
    if (st.x.size() != problem.dim || st.y.size() != problem.dim)
        throw ConfigError("run: x0/y0 dimension mismatch");

    RngState rng(cfg.seed);
    const auto points = detail::record_points(cfg);
    Trajectory t;
    auto record = [&](const IterateState& s) {
        const Residuals res = residuals(problem, s.x, s.y);
        const double xs = res.x_hat.squaredNorm();
        const double ys = res.y_hat.squaredNorm();
        const auto [alpha, beta] = step_sizes(schedule, s.k);
        t.ks.push_back(s.k);
        t.x_hat_sq.push_back(xs);
        t.y_hat_sq.push_back(ys);
        t.V.push_back(ys + eta * (beta / alpha) * xs);
        t.alpha_k.push_back(alpha);
        t.beta_k.push_back(beta);
    };

    std::size_t next_point = 0;
    try {
        detail::check_finite_below(st.x, cfg.divergence_threshold, 0, -1);
        detail::check_finite_below(st.y, cfg.divergence_threshold, 0, -1);
        for (;;) {
            if (next_point < points.size() && st.k == points[next_point]) {
                record(st);
                ++next_point;
            }
            if (st.k == cfg.iterations) break;
            st = step(st, problem, noise, schedule, rng, cfg.divergence_threshold);
        }
    } catch (const DivergenceError& e) {
        t.diverged = true;
        t.diverged_at = e.iteration;
    }
    return t;
}

/// Runs `replications` independent trajectories with child seeds
/// mix64(cfg.seed, i) and aggregates them at the shared record points.
/// Replications may execute on several threads; the reduction always runs in
/// replication order, so results are bit-identical for any thread count.
inline ReplicationSummary monte_carlo(const ProblemSpec& problem, const NoiseModel& noise,
                                      const StepSchedule& schedule, const RunConfig& cfg,
                                      int replications, double eta, int threads = 0) {
    if (replications < 2) throw ConfigError("monte_carlo: replications must be >= 2");
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, replications));

    std::vector<Trajectory> trajs(replications);
    auto worker = [&](int begin, int end_) {
        for (int i = begin; i < end_; ++i) {
            RunConfig c = cfg;
            c.seed = mix64(cfg.seed, static_cast<std::uint64_t>(i));
            trajs[i] = run(problem, noise, schedule, c, eta);
        }
    };
    if (threads == 1) {
        worker(0, replications);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (replications + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int begin = t * chunk;
            const int end_ = std::min(replications, begin + chunk);
            if (begin < end_) pool.emplace_back(worker, begin, end_);
        }
        for (auto& th : pool) th.join();
    }

    for (int i = 0; i < replications; ++i)
        if (trajs[i].diverged)
            throw DivergenceError("replication " + std::to_string(i) + " diverged at k = " +
                                      std::to_string(trajs[i].diverged_at),
                                  trajs[i].diverged_at, i);

    ReplicationSummary s;
    s.ks = trajs[0].ks;
    s.alpha_k = trajs[0].alpha_k;
    s.beta_k = trajs[0].beta_k;
    s.replications = replications;
    s.schedule = schedule;
    s.eta = eta;
    s.v0 = trajs[0].V[0];
    s.z0 = trajs[0].x_hat_sq[0] + trajs[0].y_hat_sq[0];

    const std::size_t n = s.ks.size();
    const double R = replications;
    auto reduce = [&](auto accessor, std::vector<double>& mean_out, std::vector<double>& se_out) {
        mean_out.resize(n);
        se_out.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            double sum = 0.0;
            for (int i = 0; i < replications; ++i) sum += accessor(trajs[i], j);
            const double mean = sum / R;
            double ss = 0.0;
            for (int i = 0; i < replications; ++i) {
                const double d = accessor(trajs[i], j) - mean;
                ss += d * d;
            }
            mean_out[j] = mean;
            se_out[j] = std::sqrt(ss / (R - 1.0)) / std::sqrt(R);
        }
    };
    reduce([](const Trajectory& t, std::size_t j) { return t.V[j]; }, s.mean_V, s.se_V);
    reduce([](const Trajectory& t, std::size_t j) { return t.x_hat_sq[j]; }, s.mean_xhat_sq,
           s.se_xhat_sq);
    reduce([](const Trajectory& t, std::size_t j) { return t.y_hat_sq[j]; }, s.mean_yhat_sq,
           s.se_yhat_sq);
    return s;
}

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    int points = 0;
};

/// Ordinary least squares of log(value) on log(k+1), restricted to
/// k in [window_lo * k_max, window_hi * k_max].
inline RateFit fit_rate(const std::vector<long long>& ks, const std::vector<double>& values,
                        double window_lo, double window_hi) {
    if (ks.size() != values.size()) throw ConfigError("fit_rate: ks/values size mismatch");
    if (ks.empty()) throw ConfigError("fit_rate: empty input");
    const double kmax = static_cast<double>(*std::max_element(ks.begin(), ks.end()));
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const double k = static_cast<double>(ks[i]);
        if (k < window_lo * kmax || k > window_hi * kmax) continue;
        if (!(values[i] > 0.0))
            throw ConfigError("fit_rate: nonpositive value inside the fit window");
        xs.push_back(std::log(k + 1.0));
        ys.push_back(std::log(values[i]));
    }
    if (xs.size() < 8) throw ConfigError("fit_rate: fewer than 8 points inside the fit window");

    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    RateFit f;
    f.points = static_cast<int>(xs.size());
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - (f.intercept + f.slope * xs[i]);
        ss_res += e * e;
        ss_tot += (ys[i] - my) * (ys[i] - my);
    }
    // constant series has nothing to explain; the threshold absorbs pure
    // accumulation roundoff in ss_tot
    const double degenerate = 1e-24 * n * std::max(1.0, my * my);
    f.r2 = ss_tot > degenerate ? 1.0 - ss_res / ss_tot : 1.0;
    return f;
}

}  // namespace ttsa
