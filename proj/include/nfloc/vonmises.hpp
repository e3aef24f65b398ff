#ifndef NFLOC_VONMISES_HPP
#define NFLOC_VONMISES_HPP

#include <Eigen/Dense>

namespace nfloc {

// Largest concentration we allow; keeps the Bessel-free message algebra finite.
inline constexpr double kKappaCap = 1e12;

// Wrap an angle into [-pi, pi).
double wrap_angle(double a);

// Von Mises belief over the variable pi*theta, theta a direction cosine.
// mu is the mean direction in [-pi, pi), kappa >= 0 the concentration.
// kappa == 0 is the uniform (uninformative) message.
struct VonMisesMessage {
    double mu = 0.0;
    double kappa = 0.0;

    VonMisesMessage() = default;
    VonMisesMessage(double mu_in, double kappa_in);

    static VonMisesMessage uniform() { return {}; }
    // Natural-parameter form kappa * exp(j * mu).
    std::complex<double> natural() const;
    static VonMisesMessage from_natural(const std::complex<double>& z);
};

// Product of two VM densities: natural parameters add.
VonMisesMessage vm_multiply(const VonMisesMessage& a, const VonMisesMessage& b);

// Extrinsic message: natural parameters subtract, kappa = |difference|.
// A vanishing difference yields the uniform message.
VonMisesMessage vm_extrinsic(const VonMisesMessage& post, const VonMisesMessage& prior);

// Mode of the message mapped back to theta = mu / pi, clipped to [-1, 1].
double vm_mode_theta(const VonMisesMessage& msg);

// 3-D Gaussian location belief. Construction enforces symmetry and positive
// definiteness of the covariance.
struct GaussianBelief3 {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();

    GaussianBelief3() = default;
    GaussianBelief3(const Eigen::Vector3d& mean_in, const Eigen::Matrix3d& cov_in);
};

} // namespace nfloc

#endif
