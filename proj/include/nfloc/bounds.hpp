#ifndef NFLOC_BOUNDS_HPP
#define NFLOC_BOUNDS_HPP

#include "nfloc/geometry.hpp"

#include <Eigen/Dense>
#include <complex>

namespace nfloc {

using Matrix5d = Eigen::Matrix<double, 5, 5>;

// Exact-model parameter vector eta = [p_u', angle(alpha), |alpha|]'.
struct TrueParam {
    Eigen::Vector3d p_u = Eigen::Vector3d::Zero();
    double angle_alpha = 0.0;
    double mag_alpha = 1.0;

    std::complex<double> alpha() const { return std::polar(mag_alpha, angle_alpha); }
};

// Subarray planar-wave (misspecified) model parameters
// gamma = [p_u', angle(alpha_1), |alpha_1|, ..., angle(alpha_M), |alpha_M|]'.
struct MisParam {
    Eigen::Vector3d p_u = Eigen::Vector3d::Zero();
    Eigen::VectorXd gains; // 2M entries, (angle, magnitude) per subarray

    int dim() const { return 3 + static_cast<int>(gains.size()); }
    Eigen::VectorXd to_vector() const;
    static MisParam from_vector(const Eigen::VectorXd& v);
};

struct BoundReport {
    Matrix5d fim = Matrix5d::Zero();
    double crb_pos = 0.0;
    Eigen::MatrixXd mcrb;
    double mcrb_pos = 0.0;
    MisParam pseudo_true;
    Eigen::MatrixXd a_mat; // generalized information matrices of the sandwich
    Eigen::MatrixXd b_mat;
    bool a_regularized = false;
};

// Fisher information of the exact near-field model,
// J = (2/sigma2) Re[(dmu/deta)^H (dmu/deta)].
Matrix5d fim(const ArrayGeometry& geom, const TrueParam& truth, double sigma2);

// Square root of the trace of the position block of J^-1. Throws when J is
// numerically singular, reporting the condition number.
double crb_position(const Matrix5d& j);

// Exact model mean reshaped into subarray-concatenated order.
Eigen::VectorXcd exact_subarray_mean(const TrueParam& truth, const ArrayGeometry& geom,
                                     const PartitionPlan& plan);

// Planar-wave model mean mu_F(gamma) in the same order.
Eigen::VectorXcd planar_subarray_mean(const MisParam& gamma, const ArrayGeometry& geom,
                                      const PartitionPlan& plan);

// Analytic Jacobian d mu_F / d gamma, N_B x (3 + 2M).
Eigen::MatrixXcd planar_subarray_jacobian(const MisParam& gamma, const ArrayGeometry& geom,
                                          const PartitionPlan& plan);

// Gradient of the squared model-matching residual |mu_N - mu_F(gamma)|^2.
Eigen::VectorXd mismatch_gradient(const TrueParam& truth, const MisParam& gamma,
                                  const ArrayGeometry& geom, const PartitionPlan& plan);

// Ground-truth gamma implied by the exact model: per-subarray gains
// alpha_m = alpha * exp(-j 2 pi r_m / lambda) at the true location.
MisParam gamma_truth(const TrueParam& truth, const ArrayGeometry& geom,
                     const PartitionPlan& plan);

// Parameter minimizing |mu_N - mu_F(gamma)|^2: closed-form gains alternated
// with second-order ascent over the location, started at the truth.
MisParam pseudo_true(const TrueParam& truth, const ArrayGeometry& geom,
                     const PartitionPlan& plan);

// Misspecified bound A^-1 B A^-1 + (gamma_bar - gamma0)(gamma_bar - gamma0)'.
// Second derivatives inside A come from central differences of the analytic
// Jacobian. Fills the CRB fields of the report as well.
BoundReport mcrb(const TrueParam& truth, const MisParam& gamma0, const ArrayGeometry& geom,
                 const PartitionPlan& plan, double sigma2);

} // namespace nfloc

#endif
