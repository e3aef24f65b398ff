#include "nfloc/vonmises.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

namespace nfloc {

double wrap_angle(double a) {
    double w = std::remainder(a, 2.0 * M_PI); // in [-pi, pi]
    if (w >= M_PI) w -= 2.0 * M_PI;
    return w;
}

VonMisesMessage::VonMisesMessage(double mu_in, double kappa_in) {
    if (!(kappa_in >= 0.0)) {
        throw std::invalid_argument("VonMisesMessage: kappa must be non-negative");
    }
    kappa = std::min(kappa_in, kKappaCap);
    mu = (kappa == 0.0) ? 0.0 : wrap_angle(mu_in);
}

std::complex<double> VonMisesMessage::natural() const {
    return std::polar(kappa, mu);
}

VonMisesMessage VonMisesMessage::from_natural(const std::complex<double>& z) {
    const double k = std::abs(z);
    if (k == 0.0) return uniform();
    return {std::arg(z), k};
}

VonMisesMessage vm_multiply(const VonMisesMessage& a, const VonMisesMessage& b) {
    return VonMisesMessage::from_natural(a.natural() + b.natural());
}

VonMisesMessage vm_extrinsic(const VonMisesMessage& post, const VonMisesMessage& prior) {
    return VonMisesMessage::from_natural(post.natural() - prior.natural());
}

double vm_mode_theta(const VonMisesMessage& msg) {
    const double theta = msg.mu / M_PI;
    return std::min(1.0, std::max(-1.0, theta));
}

GaussianBelief3::GaussianBelief3(const Eigen::Vector3d& mean_in, const Eigen::Matrix3d& cov_in)
    : mean(mean_in), cov(cov_in) {
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw std::invalid_argument("GaussianBelief3: covariance must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    if (es.eigenvalues().minCoeff() <= 0.0) {
        throw std::invalid_argument("GaussianBelief3: covariance must be positive definite");
    }
}

} // namespace nfloc
