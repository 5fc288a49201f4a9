#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "ttsa/errors.hpp"
#include "ttsa/rng.hpp"

namespace ttsa {

/// Scalar second-moment summaries: Gamma11 = E[xi'xi], Gamma12 = E[xi'psi],
/// Gamma22 = E[psi'psi] (traces of the covariance blocks). Gamma12 is sampled
/// faithfully but never enters any bound formula.
struct Gammas {
    double g11 = 0.0;
    double g12 = 0.0;
    double g22 = 0.0;
};

/// Zero-mean jointly Gaussian oracle noise (xi, psi), i.i.d. across steps.
/// The distribution family is a design choice; only the mean and the second
/// moments are load-bearing for the bounds. Immutable and shareable.
struct NoiseModel {
    Eigen::MatrixXd sigma_xi;     // covariance of xi, d x d symmetric PSD
    Eigen::MatrixXd sigma_psi;    // covariance of psi, d x d symmetric PSD
    Eigen::MatrixXd sigma_cross;  // E[xi psi'], d x d
    Eigen::MatrixXd joint_factor; // 2d x 2d, joint covariance = factor * factor'
    int dim = 0;
};

/// Validates the 2d x 2d joint covariance [[sxi, sc], [sc', spsi]] via a
/// pivoted symmetric factorization with diagonal jitter tolerance 1e-12
/// (boundary-PSD inputs are accepted, indefinite ones rejected) and stores
/// the sampling factor.
inline NoiseModel build_noise(const Eigen::MatrixXd& sigma_xi, const Eigen::MatrixXd& sigma_psi,
                              const Eigen::MatrixXd& sigma_cross) {
    const auto d = sigma_xi.rows();
    if (sigma_xi.cols() != d || sigma_psi.rows() != d || sigma_psi.cols() != d ||
        sigma_cross.rows() != d || sigma_cross.cols() != d)
        throw ConfigError("build_noise: blocks must be square matrices of one dimension");

    const double scale = std::max({1.0, sigma_xi.cwiseAbs().maxCoeff(),
                                   sigma_psi.cwiseAbs().maxCoeff(),
                                   sigma_cross.cwiseAbs().maxCoeff()});
    if ((sigma_xi - sigma_xi.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ConfigError("build_noise: sigma_xi is not symmetric");
    if ((sigma_psi - sigma_psi.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ConfigError("build_noise: sigma_psi is not symmetric");

    Eigen::MatrixXd joint(2 * d, 2 * d);
    joint.topLeftCorner(d, d) = sigma_xi;
    joint.topRightCorner(d, d) = sigma_cross;
    joint.bottomLeftCorner(d, d) = sigma_cross.transpose();
    joint.bottomRightCorner(d, d) = sigma_psi;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(joint);
    if (ldlt.info() != Eigen::Success)
        throw ConfigError("build_noise: joint covariance factorization failed");
    Eigen::VectorXd diag = ldlt.vectorD();
    const double jitter = 1e-12 * scale;
    if ((diag.array() < -jitter).any())
        throw ConfigError("build_noise: joint covariance is not positive semidefinite");
    diag = diag.cwiseMax(0.0);

    NoiseModel m;
    m.sigma_xi = sigma_xi;
    m.sigma_psi = sigma_psi;
    m.sigma_cross = sigma_cross;
    m.dim = static_cast<int>(d);
    m.joint_factor = ldlt.transpositionsP().transpose() *
                     Eigen::MatrixXd(Eigen::MatrixXd(ldlt.matrixL()) *
                                     diag.cwiseSqrt().asDiagonal());
    return m;
}

/// Isotropic shorthand: sigma_xi^2 I, sigma_psi^2 I and cross block
/// rho * sigma_xi * sigma_psi * I with rho in [-1, 1].
inline NoiseModel isotropic_noise(int dim, double sigma_xi, double sigma_psi, double rho_cross) {
    if (dim < 1) throw ConfigError("isotropic_noise: dim must be >= 1");
    if (sigma_xi < 0.0 || sigma_psi < 0.0)
        throw ConfigError("isotropic_noise: standard deviations must be nonnegative");
    if (rho_cross < -1.0 || rho_cross > 1.0)
        throw ConfigError("isotropic_noise: rho_cross must be in [-1, 1]");
    using Eigen::MatrixXd;
    return build_noise(sigma_xi * sigma_xi * MatrixXd::Identity(dim, dim),
                       sigma_psi * sigma_psi * MatrixXd::Identity(dim, dim),
                       rho_cross * sigma_xi * sigma_psi * MatrixXd::Identity(dim, dim));
}

inline Gammas gammas(const NoiseModel& m) {
    return {m.sigma_xi.trace(), m.sigma_cross.trace(), m.sigma_psi.trace()};
}

/// Draws one jointly Gaussian pair. Consumes exactly 2*dim raw generator
/// draws regardless of the covariance values, so streams stay aligned across
/// noise models of equal dimension.
inline void sample_pair(const NoiseModel& m, RngState& rng, Eigen::VectorXd& xi,
                        Eigen::VectorXd& psi) {
    Eigen::VectorXd z(2 * m.dim);
    fill_standard_normals(rng, z);
    const Eigen::VectorXd v = m.joint_factor * z;
    xi = v.head(m.dim);
    psi = v.tail(m.dim);
}

}  // namespace ttsa
