#ifndef NFLOC_AOA_ESTIMATOR_HPP
#define NFLOC_AOA_ESTIMATOR_HPP

#include "nfloc/channel.hpp"
#include "nfloc/vonmises.hpp"

#include <Eigen/Dense>
#include <utility>

namespace nfloc {

// Posterior summary for one subarray: VM beliefs over pi*theta_x and
// pi*theta_y plus the least-squares gain at the posterior mode.
struct AoaPosterior {
    VonMisesMessage theta_x;
    VonMisesMessage theta_y;
    ComplexGain alpha_hat;
};

struct AoaEstimatorConfig {
    int iteration_budget = 50; // total refinement iterations per call
    int max_newton_iters = 20;
    double grad_tol = 1e-10;   // scaled by 1 + |objective|
    int pad_factor = 4;        // zero-padding per axis in the coarse stage
};

// Single-source posterior inference of (theta_x, theta_y) from one subarray
// snapshot. theta follows the farfield_steering convention (cosines toward
// the source). Coarse stage: zero-padded 2-D DFT peak restricted to
// |theta| <= 1. Refinement: Newton ascent on the concentrated log-likelihood
// |a_F(theta)^H y|^2 / (sigma2 N_m) plus the VM prior log-densities.
// Laplace fit: per-axis kappa from the negative curvature at the mode,
// converted to the pi*theta variable.
AoaPosterior estimate_posterior(const Eigen::VectorXcd& y_m, int n_mx, int n_my,
                                double d_x, double d_y, double wavelength, double sigma2,
                                const VonMisesMessage& prior_x, const VonMisesMessage& prior_y,
                                const AoaEstimatorConfig& cfg = {});

// Per-axis extrinsic messages (posterior with the prior divided out).
std::pair<VonMisesMessage, VonMisesMessage>
extrinsic_from_posterior(const AoaPosterior& post, const VonMisesMessage& prior_x,
                         const VonMisesMessage& prior_y);

} // namespace nfloc

#endif
