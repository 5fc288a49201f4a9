// Command-line front end: experiment orchestration with bit-exact CSV/JSON
// emission. Exit codes: 0 success, 1 a report carries pass=false, 2 config
// error, 3 divergence.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ttsa/config.hpp"
#include "ttsa/io.hpp"

namespace {

using ttsa::Json;

Json report_to_json(const ttsa::AssumptionReport& r) {
    return Json{{"max_lipschitz_ratio_F", r.max_lipschitz_ratio_F},
                {"max_lipschitz_ratio_G", r.max_lipschitz_ratio_G},
                {"max_lipschitz_ratio_H", r.max_lipschitz_ratio_H},
                {"min_monotone_quotient_F", r.min_monotone_quotient_F},
                {"min_monotone_quotient_G", r.min_monotone_quotient_G},
                {"max_root_residual", r.max_root_residual},
                {"sample_count", r.sample_count},
                {"pass", r.pass}};
}

Json report_to_json(const ttsa::FeasibilityReport& r) {
    Json conditions = Json::array();
    for (const auto& c : r.conditions)
        conditions.push_back(
            {{"name", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"pass", c.pass}, {"extra", c.extra}});
    return Json{{"conditions", conditions}, {"pass", r.pass}};
}

Json report_to_json(const ttsa::LemmaReport& r) {
    Json checks = Json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"lemma_id", c.lemma_id},
                          {"state_id", c.state_id},
                          {"k", c.k},
                          {"lhs_mean", c.lhs_mean},
                          {"lhs_se", c.lhs_se},
                          {"rhs", c.rhs},
                          {"pass", c.pass}});
    return Json{{"checks", checks}, {"pass", r.pass}};
}

Json report_to_json(const ttsa::EnvelopeReport& r) {
    Json checks = Json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"k", c.k},
                          {"measured", c.measured},
                          {"se", c.se},
                          {"bound_literal", c.bound_literal},
                          {"bound_corrected", c.bound_corrected},
                          {"margin", c.margin},
                          {"pass", c.pass}});
    return Json{{"checks", checks},
                {"variant", r.variant == ttsa::BoundVariant::corrected ? "corrected" : "literal"},
                {"pass", r.pass}};
}

Json constants_to_json(const ttsa::DerivedConstants& dc) {
    return Json{{"L1", dc.L1},   {"L2", dc.L2}, {"L", dc.L},   {"eta_x", dc.eta_x},
                {"eta", dc.eta}, {"mu", dc.mu}, {"C1", dc.C1}, {"C2", dc.C2},
                {"C", dc.C}};
}

Json schedule_to_json(const ttsa::StepSchedule& s) {
    return Json{{"alpha0", s.alpha0}, {"beta0", s.beta0}, {"a", s.a}, {"b", s.b},
                {"offset", s.offset}};
}

struct OdeBlock {
    double epsilon = 0.01;
    double h = 1e-3;
    double T = 10.0;
    long long record_stride = 1;
    std::vector<double> x0, y0;
};

OdeBlock parse_ode_block(const Json& root) {
    OdeBlock o;
    if (!root.contains("ode")) return o;
    const auto& j = root.at("ode");
    o.epsilon = ttsa::detail::get_or<double>(j, "epsilon", o.epsilon);
    o.h = ttsa::detail::get_or<double>(j, "h", o.h);
    o.T = ttsa::detail::get_or<double>(j, "T", o.T);
    o.record_stride = ttsa::detail::get_or<long long>(j, "record_stride", o.record_stride);
    if (j.contains("x0")) o.x0 = j.at("x0").get<std::vector<double>>();
    if (j.contains("y0")) o.y0 = j.at("y0").get<std::vector<double>>();
    return o;
}

Json ode_block_to_json(const OdeBlock& o) {
    Json j{{"epsilon", o.epsilon}, {"h", o.h}, {"T", o.T}, {"record_stride", o.record_stride}};
    if (!o.x0.empty()) j["x0"] = o.x0;
    if (!o.y0.empty()) j["y0"] = o.y0;
    return j;
}

const std::string& require_path(const std::string& path, const char* which) {
    if (path.empty())
        throw ttsa::ConfigError(std::string("config: outputs.") + which +
                                " is required for this command");
    return path;
}

void write_json_artifact(const std::string& path, Json payload, const Json& resolved) {
    payload["resolved_config"] = resolved;
    ttsa::write_text_file(path, payload.dump(2) + "\n");
}

int execute(const std::string& command, const Json& root, ttsa::ExperimentConfig& cfg) {
    const OdeBlock ode_blk = parse_ode_block(root);
    const Json resolved = ttsa::echo_config(cfg, ode_block_to_json(ode_blk));

    const ttsa::ProblemSpec problem = cfg.make_problem();
    const ttsa::ProblemConstants& pc = problem.constants;

    if (command == "ode") {
        ttsa::OdeConfig oc;
        oc.epsilon = ode_blk.epsilon;
        oc.h = ode_blk.h;
        oc.T = ode_blk.T;
        oc.record_stride = ode_blk.record_stride;
        if (!ode_blk.x0.empty())
            oc.x0 = Eigen::Map<const ttsa::Vector>(ode_blk.x0.data(), ode_blk.x0.size());
        if (!ode_blk.y0.empty())
            oc.y0 = Eigen::Map<const ttsa::Vector>(ode_blk.y0.data(), ode_blk.y0.size());
        const ttsa::OdeTrajectory t = ttsa::integrate(problem, oc);
        ttsa::write_text_file(require_path(cfg.csv_path, "csv_path"), ttsa::csv_ode(t));
        if (!cfg.json_path.empty())
            write_json_artifact(cfg.json_path, Json{{"records", t.times.size()}}, resolved);
        return 0;
    }

    const ttsa::NoiseModel noise = cfg.make_noise();
    const ttsa::Gammas g = ttsa::gammas(noise);
    const ttsa::StepSchedule schedule = cfg.make_schedule_for(pc);
    const ttsa::RunConfig rc = cfg.make_run_config(problem);

    const ttsa::Residuals res0 = ttsa::residuals(problem, rc.x0, rc.y0);
    const double z0 = res0.x_hat.squaredNorm() + res0.y_hat.squaredNorm();
    const ttsa::DerivedConstants dc = ttsa::derive_constants(pc, schedule, g, z0,
                                                             cfg.eta_x_override, cfg.eta_variant);
    const double v0 =
        ttsa::lyapunov(res0.x_hat.squaredNorm(), res0.y_hat.squaredNorm(), 0, schedule, dc.eta);

    if (command == "constants") {
        Json payload{{"constants", constants_to_json(dc)},
                     {"schedule", schedule_to_json(schedule)},
                     {"gammas", Json{{"gamma11", g.g11}, {"gamma12", g.g12}, {"gamma22", g.g22}}},
                     {"z0", z0},
                     {"V0", v0}};
        write_json_artifact(require_path(cfg.json_path, "json_path"), payload, resolved);
        return 0;
    }

    if (command == "verify") {
        const ttsa::AssumptionReport ar =
            ttsa::verify_assumptions(problem, cfg.verify_samples, cfg.verify_radius, cfg.seed);
        const ttsa::FeasibilityReport fr = ttsa::check_conditions(pc, schedule, dc);
        Json payload{{"assumptions", report_to_json(ar)},
                     {"feasibility", report_to_json(fr)},
                     {"schedule", schedule_to_json(schedule)}};
        write_json_artifact(require_path(cfg.json_path, "json_path"), payload, resolved);
        return (ar.pass && fr.pass) ? 0 : 1;
    }

    if (command == "run") {
        const ttsa::Trajectory t = ttsa::run(problem, noise, schedule, rc, dc.eta);
        ttsa::write_text_file(require_path(cfg.csv_path, "csv_path"), ttsa::csv_run(t));
        if (!cfg.json_path.empty())
            write_json_artifact(cfg.json_path,
                                Json{{"diverged", t.diverged}, {"diverged_at", t.diverged_at}},
                                resolved);
        if (t.diverged) {
            std::cerr << "run: trajectory diverged at k = " << t.diverged_at << "\n";
            return 3;
        }
        return 0;
    }

    if (command == "mc" || command == "rate" || command == "envelope") {
        const ttsa::ReplicationSummary sum = ttsa::monte_carlo(problem, noise, schedule, rc,
                                                               cfg.replications, dc.eta,
                                                               cfg.threads);
        if (command == "mc") {
            std::vector<double> b_lit(sum.ks.size(), std::nan("")),
                b_cor(sum.ks.size(), std::nan(""));
            if (ttsa::is_envelope_schedule(schedule, pc)) {
                for (std::size_t i = 0; i < sum.ks.size(); ++i) {
                    b_lit[i] = ttsa::envelope_bound(sum.ks[i], dc, pc, schedule, g, v0,
                                                    ttsa::BoundVariant::literal);
                    b_cor[i] = ttsa::envelope_bound(sum.ks[i], dc, pc, schedule, g, v0,
                                                    ttsa::BoundVariant::corrected);
                }
            }
            ttsa::write_text_file(require_path(cfg.csv_path, "csv_path"),
                                  ttsa::csv_mc(sum, b_lit, b_cor));
            if (!cfg.json_path.empty())
                write_json_artifact(cfg.json_path,
                                    Json{{"replications", sum.replications},
                                         {"records", sum.ks.size()},
                                         {"V0", sum.v0},
                                         {"z0", sum.z0}},
                                    resolved);
            return 0;
        }
        if (command == "rate") {
            const std::vector<double>& series = cfg.rate_target == "mean_xhat_sq"
                                                    ? sum.mean_xhat_sq
                                                    : cfg.rate_target == "mean_yhat_sq"
                                                          ? sum.mean_yhat_sq
                                                          : sum.mean_V;
            const ttsa::RateFit f =
                ttsa::fit_rate(sum.ks, series, cfg.rate_window_lo, cfg.rate_window_hi);
            Json payload{{"target", cfg.rate_target},
                         {"window", {cfg.rate_window_lo, cfg.rate_window_hi}},
                         {"slope", f.slope},
                         {"intercept", f.intercept},
                         {"r2", f.r2},
                         {"points", f.points}};
            write_json_artifact(require_path(cfg.json_path, "json_path"), payload, resolved);
            return 0;
        }
        const ttsa::EnvelopeReport er =
            ttsa::envelope_check(sum, dc, pc, g, sum.v0, cfg.bound_variant, cfg.envelope_se_slack);
        write_json_artifact(require_path(cfg.json_path, "json_path"), report_to_json(er),
                            resolved);
        return er.pass ? 0 : 1;
    }

    if (command == "lemmas") {
        ttsa::LemmaCheckConfig lc = cfg.lemmas;
        lc.seed = cfg.seed;
        lc.threads = cfg.threads;
        const ttsa::LemmaReport lr =
            ttsa::check_lemmas(problem, noise, schedule, pc, dc, {}, lc);
        write_json_artifact(require_path(cfg.json_path, "json_path"), report_to_json(lr),
                            resolved);
        return lr.pass ? 0 : 1;
    }

    throw ttsa::ConfigError("unknown command '" + command + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-time-scale stochastic approximation toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_flag;
    for (const char* name : {"run", "mc", "rate", "verify", "lemmas", "envelope", "ode",
                             "constants"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
        sub->add_option("--seed", seed_flag, "base seed; overrides config and TTSA_SEED");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        std::ifstream in(config_path);
        if (!in) throw ttsa::ConfigError("cannot open config file '" + config_path + "'");
        Json root;
        try {
            root = Json::parse(in);
        } catch (const Json::exception& e) {
            throw ttsa::ConfigError(std::string("config parse error: ") + e.what());
        }
        ttsa::ExperimentConfig cfg = ttsa::parse_config(root);

        // seed precedence: CLI flag > config > TTSA_SEED environment variable
        if (!root.contains("noise") || !root.at("noise").contains("seed")) {
            if (const char* env = std::getenv("TTSA_SEED"))
                cfg.seed = std::strtoull(env, nullptr, 10);
        }
        if (seed_flag) cfg.seed = *seed_flag;

        return execute(command, root, cfg);
    } catch (const ttsa::DivergenceError& e) {
        std::cerr << "ttsa " << command << ": " << e.what() << "\n";
        return 3;
    } catch (const ttsa::ConfigError& e) {
        std::cerr << "ttsa " << command << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "ttsa " << command << ": " << e.what() << "\n";
        return 2;
    }
}
