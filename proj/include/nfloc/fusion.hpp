#ifndef NFLOC_FUSION_HPP
#define NFLOC_FUSION_HPP

#include "nfloc/geometry.hpp"
#include "nfloc/vonmises.hpp"

#include <Eigen/Dense>
#include <limits>
#include <vector>

namespace nfloc {

// Message slot for subarray m (1-based) and axis u (0 = x, 1 = y).
inline int fusion_slot(int m, int axis) { return 2 * (m - 1) + axis; }

// Messages and beliefs exchanged by the fusion stage. All VM means live on
// the variable pi * theta with theta = (p_bs - p)' e_u / |p_bs - p|.
struct FusionState {
    std::vector<VonMisesMessage> incoming; // angle -> geometry factor, 2M slots
    std::vector<GaussianBelief3> beliefs;  // location belief per slot
    std::vector<VonMisesMessage> outgoing; // geometry factor -> angle, 2M slots
    std::vector<Eigen::Vector3d> anchors;  // warm starts for the ascent per slot
};

struct FusionOpts {
    int max_iters = 100;       // ascent iterations per belief update
    double grad_tol = 1e-8;
    double armijo = 1e-4;
    double shrink = 0.5;
    double initial_step = 1.0;
    // Search region: the source lies in front of the array, and the angle
    // messages cannot localize anything far beyond the Fraunhofer distance.
    double min_z = 1e-3;
    double max_range = std::numeric_limits<double>::infinity();
};

struct VarpiMax {
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
    Eigen::Matrix3d hessian = Eigen::Matrix3d::Zero();
    double value = 0.0;
    int iters = 0;
    bool converged = false;
};

// Sum of kappa * cos(pi * e_n' e_v - mu) over all message slots except
// `exclude` (pass -1 to keep every term). e_n points from p toward the
// subarray center.
double varpi(const Eigen::Vector3d& p, const PartitionPlan& plan,
             const std::vector<VonMisesMessage>& msgs, int exclude = -1);

Eigen::Vector3d varpi_gradient(const Eigen::Vector3d& p, const PartitionPlan& plan,
                               const std::vector<VonMisesMessage>& msgs, int exclude = -1);

Eigen::Matrix3d varpi_hessian(const Eigen::Vector3d& p, const PartitionPlan& plan,
                              const std::vector<VonMisesMessage>& msgs, int exclude = -1);

// Gradient ascent with backtracking line search; monotone in the objective.
// Returns the final iterate and the Hessian there.
VarpiMax maximize_varpi(const Eigen::Vector3d& init, const PartitionPlan& plan,
                        const std::vector<VonMisesMessage>& msgs, int exclude,
                        const FusionOpts& opts = {});

// Laplace belief at a maximizer: mean p_hat, covariance (-H)^-1. A
// non-positive-definite -H gets a small diagonal ridge; `regularized`
// reports that.
GaussianBelief3 gaussian_belief(const Eigen::Vector3d& p_hat, const Eigen::Matrix3d& hessian,
                                bool* regularized = nullptr);

// VM message for axis u from a Gaussian location belief: mean pi*theta_bar,
// concentration |u_bar|^2 / (pi^2 (1 - theta_bar^2) v' C v). Degenerate
// geometry (theta_bar at +-1 or u_bar parallel to the axis) yields the
// uniform message and sets `degenerate`.
VonMisesMessage projection_message(const GaussianBelief3& belief,
                                   const Eigen::Vector3d& p_bs_m, int axis,
                                   bool* degenerate = nullptr);

// Closed-form linear least-squares start point: every informative slot
// contributes e_u' (p_bs_m - p) = theta_hat * |p_bs_m - p0| linearized about
// the nominal point p0 = nominal_range * mean message direction.
Eigen::Vector3d triangulate_init(const PartitionPlan& plan,
                                 const std::vector<VonMisesMessage>& msgs,
                                 double nominal_range);

} // namespace nfloc

#endif
