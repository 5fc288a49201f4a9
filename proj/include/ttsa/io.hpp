#pragma once

#include <charconv>
#include <fstream>
#include <string>
#include <system_error>

#include "ttsa/analysis.hpp"
#include "ttsa/errors.hpp"
#include "ttsa/ode.hpp"
#include "ttsa/solver.hpp"

namespace ttsa {

/// Locale-independent decimal rendering with 17 significant digits (enough
/// to round-trip any double bit-exactly).
inline std::string fmt17(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file '" + path + "'");
    out << content;
    if (!out) throw ConfigError("failed writing output file '" + path + "'");
}

/// Column schema: k, x_hat_sq, y_hat_sq, V, alpha_k, beta_k.
inline std::string csv_run(const Trajectory& t) {
    std::string s = "k,x_hat_sq,y_hat_sq,V,alpha_k,beta_k\n";
    for (std::size_t i = 0; i < t.ks.size(); ++i) {
        s += std::to_string(t.ks[i]);
        s += ',' + fmt17(t.x_hat_sq[i]) + ',' + fmt17(t.y_hat_sq[i]) + ',' + fmt17(t.V[i]);
        s += ',' + fmt17(t.alpha_k[i]) + ',' + fmt17(t.beta_k[i]) + '\n';
    }
    return s;
}

/// Column schema: k, mean_V, se_V, mean_xhat_sq, se_xhat_sq, mean_yhat_sq,
/// se_yhat_sq, alpha_k, beta_k, bound_literal, bound_corrected. The bound
/// columns are NaN when the schedule is not the envelope template.
inline std::string csv_mc(const ReplicationSummary& s, const std::vector<double>& bound_literal,
                          const std::vector<double>& bound_corrected) {
    std::string out =
        "k,mean_V,se_V,mean_xhat_sq,se_xhat_sq,mean_yhat_sq,se_yhat_sq,alpha_k,beta_k,"
        "bound_literal,bound_corrected\n";
    for (std::size_t i = 0; i < s.ks.size(); ++i) {
        out += std::to_string(s.ks[i]);
        out += ',' + fmt17(s.mean_V[i]) + ',' + fmt17(s.se_V[i]);
        out += ',' + fmt17(s.mean_xhat_sq[i]) + ',' + fmt17(s.se_xhat_sq[i]);
        out += ',' + fmt17(s.mean_yhat_sq[i]) + ',' + fmt17(s.se_yhat_sq[i]);
        out += ',' + fmt17(s.alpha_k[i]) + ',' + fmt17(s.beta_k[i]);
        out += ',' + fmt17(bound_literal[i]) + ',' + fmt17(bound_corrected[i]) + '\n';
    }
    return out;
}

/// Column schema: t, fast_residual, slow_error.
inline std::string csv_ode(const OdeTrajectory& t) {
    std::string s = "t,fast_residual,slow_error\n";
    for (std::size_t i = 0; i < t.times.size(); ++i) {
        s += fmt17(t.times[i]) + ',' + fmt17(t.fast_residual[i]) + ',' +
             fmt17(t.slow_error[i]) + '\n';
    }
    return s;
}

}  // namespace ttsa
