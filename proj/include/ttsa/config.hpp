#pragma once

#include <cstdlib>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ttsa/analysis.hpp"
#include "ttsa/errors.hpp"
#include "ttsa/noise.hpp"
#include "ttsa/operators.hpp"
#include "ttsa/schedules.hpp"
#include "ttsa/solver.hpp"

namespace ttsa {

using Json = nlohmann::json;

namespace detail {

inline void require_keys(const Json& obj, const std::string& where,
                         const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key))
            throw ConfigError("config: unknown key '" + where + "." + key + "'");
}

template <typename T>
T get_or(const Json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ConfigError("config: bad value for '" + key + "'");
    }
}

inline Eigen::MatrixXd parse_matrix(const Json& j, const std::string& where, int dim) {
    if (!j.is_array()) throw ConfigError("config: '" + where + "' must be a matrix (array of rows)");
    Eigen::MatrixXd m(dim, dim);
    if (static_cast<int>(j.size()) != dim)
        throw ConfigError("config: '" + where + "' must have " + std::to_string(dim) + " rows");
    for (int r = 0; r < dim; ++r) {
        const auto& row = j.at(r);
        if (!row.is_array() || static_cast<int>(row.size()) != dim)
            throw ConfigError("config: '" + where + "' rows must have length " +
                              std::to_string(dim));
        for (int c = 0; c < dim; ++c) m(r, c) = row.at(c).get<double>();
    }
    return m;
}

inline Json matrix_to_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace detail

/// Fully resolved experiment description. Parsing is strict: unknown keys are
/// rejected, every field is either supplied or defaulted, and the resolved
/// form is echoed into each JSON artifact so a run can be reproduced from its
/// own output.
struct ExperimentConfig {
    // problem
    std::string problem_name = "nonlinear-tanh";
    int dim = 4;
    ParamMap params;

    // noise
    std::string noise_kind = "isotropic";  // isotropic | matrices
    double sigma_xi = 0.1, sigma_psi = 0.1, rho_cross = 0.0;
    Eigen::MatrixXd m_sigma_xi, m_sigma_psi, m_sigma_cross;  // matrices kind
    std::uint64_t seed = 0;

    // schedule
    std::string schedule_mode = "envelope";  // explicit | auto_tune | envelope
    double alpha0 = 1.0, beta0 = 1.0, a = 2.0 / 3.0, b = 1.0;
    long long offset = 1;
    std::optional<double> eta_x_override;
    EtaVariant eta_variant = EtaVariant::theorem;
    BoundVariant bound_variant = BoundVariant::corrected;
    double tune_beta0 = 0.05, tune_safety = 0.9;
    std::optional<double> envelope_alpha0;

    // run
    long long iterations = 100000;
    int replications = 100;
    long long record_stride = 0;  // 0 = log-spaced
    int points_per_decade = 60;
    std::string initializer = "offset-ones";  // offset-ones | solution | explicit
    std::vector<double> x0, y0;
    double divergence_threshold = 1e12;
    int threads = 0;

    // outputs
    std::string csv_path, json_path;

    // command blocks
    long long verify_samples = 10000;
    double verify_radius = 10.0;
    LemmaCheckConfig lemmas;
    double envelope_se_slack = 3.0;
    double rate_window_lo = 0.01, rate_window_hi = 1.0;
    std::string rate_target = "mean_V";

    ProblemSpec make_problem() const { return make_builtin(problem_name, params, dim); }

    NoiseModel make_noise() const {
        if (noise_kind == "isotropic") return isotropic_noise(dim, sigma_xi, sigma_psi, rho_cross);
        return build_noise(m_sigma_xi, m_sigma_psi, m_sigma_cross);
    }

    StepSchedule make_schedule_for(const ProblemConstants& pc) const {
        if (schedule_mode == "auto_tune") return auto_tune(pc, tune_beta0, tune_safety);
        if (schedule_mode == "envelope") return envelope_schedule(pc, envelope_alpha0);
        return ttsa::make_schedule(alpha0, beta0, a, b, offset);
    }

    void initial_state(const ProblemSpec& p, Vector& x, Vector& y) const {
        if (initializer == "solution") {
            x = p.x_star;
            y = p.y_star;
        } else if (initializer == "explicit") {
            if (static_cast<int>(x0.size()) != p.dim || static_cast<int>(y0.size()) != p.dim)
                throw ConfigError("config: x0/y0 must have length dim");
            x = Eigen::Map<const Vector>(x0.data(), p.dim);
            y = Eigen::Map<const Vector>(y0.data(), p.dim);
        } else {
            x = p.x_star + Vector::Ones(p.dim);
            y = p.y_star + Vector::Ones(p.dim);
        }
    }

    RunConfig make_run_config(const ProblemSpec& p) const {
        RunConfig rc;
        rc.iterations = iterations;
        rc.record_stride = record_stride;
        rc.points_per_decade = points_per_decade;
        rc.seed = seed;
        rc.divergence_threshold = divergence_threshold;
        initial_state(p, rc.x0, rc.y0);
        return rc;
    }
};

inline ExperimentConfig parse_config(const Json& root) {
    detail::require_keys(root, "", {"problem", "noise", "schedule", "run", "outputs", "verify",
                                    "lemmas", "envelope", "rate", "ode"});
    ExperimentConfig c;

    if (root.contains("problem")) {
        const auto& p = root.at("problem");
        detail::require_keys(p, "problem", {"name", "dim", "params"});
        c.problem_name = detail::get_or<std::string>(p, "name", c.problem_name);
        c.dim = detail::get_or<int>(p, "dim", c.dim);
        if (p.contains("params")) {
            if (!p.at("params").is_object())
                throw ConfigError("config: 'problem.params' must be an object");
            for (const auto& [key, value] : p.at("params").items()) {
                if (value.is_number()) {
                    c.params[key] = {value.get<double>()};
                } else if (value.is_array()) {
                    c.params[key] = value.get<std::vector<double>>();
                } else {
                    throw ConfigError("config: parameter '" + key + "' must be number or array");
                }
            }
        }
    }

    if (root.contains("noise")) {
        const auto& nz = root.at("noise");
        detail::require_keys(nz, "noise",
                             {"kind", "sigma_xi", "sigma_psi", "rho_cross", "sigma_cross", "seed"});
        c.noise_kind = detail::get_or<std::string>(nz, "kind", c.noise_kind);
        c.seed = detail::get_or<std::uint64_t>(nz, "seed", c.seed);
        if (c.noise_kind == "isotropic") {
            c.sigma_xi = detail::get_or<double>(nz, "sigma_xi", c.sigma_xi);
            c.sigma_psi = detail::get_or<double>(nz, "sigma_psi", c.sigma_psi);
            c.rho_cross = detail::get_or<double>(nz, "rho_cross", c.rho_cross);
        } else if (c.noise_kind == "matrices") {
            if (!nz.contains("sigma_xi") || !nz.contains("sigma_psi"))
                throw ConfigError("config: matrices noise needs sigma_xi and sigma_psi");
            c.m_sigma_xi = detail::parse_matrix(nz.at("sigma_xi"), "noise.sigma_xi", c.dim);
            c.m_sigma_psi = detail::parse_matrix(nz.at("sigma_psi"), "noise.sigma_psi", c.dim);
            c.m_sigma_cross = nz.contains("sigma_cross")
                                  ? detail::parse_matrix(nz.at("sigma_cross"), "noise.sigma_cross",
                                                         c.dim)
                                  : Eigen::MatrixXd::Zero(c.dim, c.dim).eval();
        } else {
            throw ConfigError("config: noise.kind must be 'isotropic' or 'matrices'");
        }
    }

    if (root.contains("schedule")) {
        const auto& s = root.at("schedule");
        detail::require_keys(s, "schedule",
                             {"alpha0", "beta0", "a", "b", "offset", "eta_x", "eta_variant",
                              "bound_variant", "auto_tune", "envelope_defaults"});
        const bool has_auto = s.contains("auto_tune");
        const bool has_env = s.contains("envelope_defaults");
        const bool has_explicit = s.contains("alpha0") || s.contains("beta0") || s.contains("a") ||
                                  s.contains("b") || s.contains("offset");
        if (has_auto + has_env + has_explicit > 1)
            throw ConfigError(
                "config: schedule must use exactly one of explicit fields, auto_tune, "
                "envelope_defaults");
        if (has_auto) {
            c.schedule_mode = "auto_tune";
            const auto& t = s.at("auto_tune");
            detail::require_keys(t, "schedule.auto_tune", {"beta0", "safety"});
            c.tune_beta0 = detail::get_or<double>(t, "beta0", c.tune_beta0);
            c.tune_safety = detail::get_or<double>(t, "safety", c.tune_safety);
        } else if (has_explicit) {
            c.schedule_mode = "explicit";
            c.alpha0 = detail::get_or<double>(s, "alpha0", c.alpha0);
            c.beta0 = detail::get_or<double>(s, "beta0", c.beta0);
            c.a = detail::get_or<double>(s, "a", c.a);
            c.b = detail::get_or<double>(s, "b", c.b);
            c.offset = detail::get_or<long long>(s, "offset", c.offset);
        } else if (has_env) {
            c.schedule_mode = "envelope";
            const auto& t = s.at("envelope_defaults");
            detail::require_keys(t, "schedule.envelope_defaults", {"alpha0"});
            if (t.contains("alpha0")) c.envelope_alpha0 = t.at("alpha0").get<double>();
        }
        if (s.contains("eta_x")) c.eta_x_override = s.at("eta_x").get<double>();
        const std::string ev = detail::get_or<std::string>(s, "eta_variant", "theorem");
        if (ev == "theorem")
            c.eta_variant = EtaVariant::theorem;
        else if (ev == "proof")
            c.eta_variant = EtaVariant::proof;
        else
            throw ConfigError("config: eta_variant must be 'theorem' or 'proof'");
        const std::string bv = detail::get_or<std::string>(s, "bound_variant", "corrected");
        if (bv == "literal")
            c.bound_variant = BoundVariant::literal;
        else if (bv == "corrected")
            c.bound_variant = BoundVariant::corrected;
        else
            throw ConfigError("config: bound_variant must be 'literal' or 'corrected'");
    }

    if (root.contains("run")) {
        const auto& r = root.at("run");
        detail::require_keys(r, "run",
                             {"iterations", "replications", "record_stride", "points_per_decade",
                              "x0", "y0", "initializer", "divergence_threshold", "threads"});
        c.iterations = detail::get_or<long long>(r, "iterations", c.iterations);
        c.replications = detail::get_or<int>(r, "replications", c.replications);
        if (r.contains("record_stride")) {
            const auto& rs = r.at("record_stride");
            if (rs.is_string()) {
                if (rs.get<std::string>() != "log")
                    throw ConfigError("config: record_stride must be 'log' or a positive integer");
                c.record_stride = 0;
            } else {
                c.record_stride = rs.get<long long>();
                if (c.record_stride < 1)
                    throw ConfigError("config: record_stride must be 'log' or a positive integer");
            }
        }
        c.points_per_decade = detail::get_or<int>(r, "points_per_decade", c.points_per_decade);
        c.divergence_threshold =
            detail::get_or<double>(r, "divergence_threshold", c.divergence_threshold);
        c.threads = detail::get_or<int>(r, "threads", c.threads);
        if (r.contains("initializer")) {
            c.initializer = r.at("initializer").get<std::string>();
            if (c.initializer != "offset-ones" && c.initializer != "solution")
                throw ConfigError("config: initializer must be 'offset-ones' or 'solution'");
        }
        if (r.contains("x0") || r.contains("y0")) {
            if (!r.contains("x0") || !r.contains("y0"))
                throw ConfigError("config: x0 and y0 must be given together");
            c.initializer = "explicit";
            c.x0 = r.at("x0").get<std::vector<double>>();
            c.y0 = r.at("y0").get<std::vector<double>>();
        }
        if (c.iterations < 1) throw ConfigError("config: iterations must be >= 1");
    }

    if (root.contains("outputs")) {
        const auto& o = root.at("outputs");
        detail::require_keys(o, "outputs", {"csv_path", "json_path"});
        c.csv_path = detail::get_or<std::string>(o, "csv_path", "");
        c.json_path = detail::get_or<std::string>(o, "json_path", "");
    }

    if (root.contains("verify")) {
        const auto& v = root.at("verify");
        detail::require_keys(v, "verify", {"samples", "radius"});
        c.verify_samples = detail::get_or<long long>(v, "samples", c.verify_samples);
        c.verify_radius = detail::get_or<double>(v, "radius", c.verify_radius);
    }

    if (root.contains("lemmas")) {
        const auto& l = root.at("lemmas");
        detail::require_keys(l, "lemmas",
                             {"M", "states", "radii", "k_indices", "se_slack",
                              "traj_replications", "traj_iterations"});
        c.lemmas.M = detail::get_or<long long>(l, "M", c.lemmas.M);
        c.lemmas.n_states = detail::get_or<int>(l, "states", c.lemmas.n_states);
        if (l.contains("radii")) c.lemmas.radii = l.at("radii").get<std::vector<double>>();
        if (l.contains("k_indices"))
            c.lemmas.k_indices = l.at("k_indices").get<std::vector<long long>>();
        c.lemmas.se_slack = detail::get_or<double>(l, "se_slack", c.lemmas.se_slack);
        c.lemmas.traj_replications =
            detail::get_or<int>(l, "traj_replications", c.lemmas.traj_replications);
        c.lemmas.traj_iterations =
            detail::get_or<long long>(l, "traj_iterations", c.lemmas.traj_iterations);
    }

    if (root.contains("envelope")) {
        const auto& e = root.at("envelope");
        detail::require_keys(e, "envelope", {"se_slack"});
        c.envelope_se_slack = detail::get_or<double>(e, "se_slack", c.envelope_se_slack);
    }

    if (root.contains("rate")) {
        const auto& r = root.at("rate");
        detail::require_keys(r, "rate", {"window", "target"});
        if (r.contains("window")) {
            const auto w = r.at("window").get<std::vector<double>>();
            if (w.size() != 2) throw ConfigError("config: rate.window must be [lo, hi]");
            c.rate_window_lo = w[0];
            c.rate_window_hi = w[1];
        }
        c.rate_target = detail::get_or<std::string>(r, "target", c.rate_target);
        if (c.rate_target != "mean_V" && c.rate_target != "mean_xhat_sq" &&
            c.rate_target != "mean_yhat_sq")
            throw ConfigError("config: rate.target must be mean_V, mean_xhat_sq or mean_yhat_sq");
    }

    // ode block is parsed by the tool (it carries no defaults shared with the
    // library); validate its keys here so strictness covers the whole file.
    if (root.contains("ode")) {
        detail::require_keys(root.at("ode"), "ode",
                             {"epsilon", "h", "T", "record_stride", "x0", "y0"});
    }

    return c;
}

/// The resolved-config echo: parsing this object again yields an identical
/// resolved config.
inline Json echo_config(const ExperimentConfig& c, const Json& ode_block = {}) {
    Json j;
    Json params = Json::object();
    for (const auto& [key, value] : c.params) params[key] = value;
    j["problem"] = {{"name", c.problem_name}, {"dim", c.dim}, {"params", params}};

    Json nz;
    nz["kind"] = c.noise_kind;
    nz["seed"] = c.seed;
    if (c.noise_kind == "isotropic") {
        nz["sigma_xi"] = c.sigma_xi;
        nz["sigma_psi"] = c.sigma_psi;
        nz["rho_cross"] = c.rho_cross;
    } else {
        nz["sigma_xi"] = detail::matrix_to_json(c.m_sigma_xi);
        nz["sigma_psi"] = detail::matrix_to_json(c.m_sigma_psi);
        nz["sigma_cross"] = detail::matrix_to_json(c.m_sigma_cross);
    }
    j["noise"] = nz;

    Json sch;
    if (c.schedule_mode == "auto_tune") {
        sch["auto_tune"] = {{"beta0", c.tune_beta0}, {"safety", c.tune_safety}};
    } else if (c.schedule_mode == "envelope") {
        sch["envelope_defaults"] = Json::object();
        if (c.envelope_alpha0) sch["envelope_defaults"]["alpha0"] = *c.envelope_alpha0;
    } else {
        sch["alpha0"] = c.alpha0;
        sch["beta0"] = c.beta0;
        sch["a"] = c.a;
        sch["b"] = c.b;
        sch["offset"] = c.offset;
    }
    if (c.eta_x_override) sch["eta_x"] = *c.eta_x_override;
    sch["eta_variant"] = c.eta_variant == EtaVariant::theorem ? "theorem" : "proof";
    sch["bound_variant"] = c.bound_variant == BoundVariant::corrected ? "corrected" : "literal";
    j["schedule"] = sch;

    Json run;
    run["iterations"] = c.iterations;
    run["replications"] = c.replications;
    if (c.record_stride == 0)
        run["record_stride"] = "log";
    else
        run["record_stride"] = c.record_stride;
    run["points_per_decade"] = c.points_per_decade;
    run["divergence_threshold"] = c.divergence_threshold;
    run["threads"] = c.threads;
    if (c.initializer == "explicit") {
        run["x0"] = c.x0;
        run["y0"] = c.y0;
    } else {
        run["initializer"] = c.initializer;
    }
    j["run"] = run;

    j["outputs"] = {{"csv_path", c.csv_path}, {"json_path", c.json_path}};
    j["verify"] = {{"samples", c.verify_samples}, {"radius", c.verify_radius}};
    j["lemmas"] = {{"M", c.lemmas.M},
                   {"states", c.lemmas.n_states},
                   {"radii", c.lemmas.radii},
                   {"k_indices", c.lemmas.k_indices},
                   {"se_slack", c.lemmas.se_slack},
                   {"traj_replications", c.lemmas.traj_replications},
                   {"traj_iterations", c.lemmas.traj_iterations}};
    j["envelope"] = {{"se_slack", c.envelope_se_slack}};
    j["rate"] = {{"window", {c.rate_window_lo, c.rate_window_hi}}, {"target", c.rate_target}};
    if (!ode_block.is_null() && !ode_block.empty()) j["ode"] = ode_block;
    return j;
}

}  // namespace ttsa
