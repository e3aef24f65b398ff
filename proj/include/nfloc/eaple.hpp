#ifndef NFLOC_EAPLE_HPP
#define NFLOC_EAPLE_HPP

#include "nfloc/channel.hpp"
#include "nfloc/geometry.hpp"

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace nfloc {

// Spherical parameterization of the UE location,
// p = r [cos(omega) sin(phi), sin(omega) sin(phi), cos(phi)].
struct PolarPoint {
    double r = 1.0;        // > 0
    double omega = 0.0;    // [0, 2*pi)
    double phi = 0.25;     // [0, pi/2)

    Eigen::Vector3d to_cartesian() const;
    static PolarPoint from_cartesian(const Eigen::Vector3d& p);
};

struct EapleConfig {
    int t3 = 200;      // outer coordinate-ascent iterations
    int t_theta = 10;  // inner ascent steps on the angle block
    int t_r = 10;      // inner ascent steps on the range block
    double armijo = 1e-4;
    double shrink = 0.5;
    double angle_step = 1.0;     // initial trial move, radians
    double range_step_frac = 0.1; // initial trial move, fraction of r
    double rel_ftol = 1e-9;      // relative objective-change stop
    double phi_margin = 1e-6;
    double r_min = 1e-3;
};

struct EapleTraceRow {
    int iter = 0;
    double f = 0.0;
    double r = 0.0;
    double omega = 0.0;
    double phi = 0.0;
};

struct EapleResult {
    PolarPoint q;
    Eigen::Vector3d p_hat = Eigen::Vector3d::Zero();
    double f_final = 0.0;
    std::vector<EapleTraceRow> trace;
    std::vector<std::string> flags;
    int inner_iterations = 0; // attempted ascent steps, for cost accounting
};

// Concentrated negative-residual objective
// F = -(1/sigma2) || y - (a^H y / ||a||^2) a ||^2, evaluated literally.
double ml_objective(const Snapshot& snapshot, const ArrayGeometry& geom, const PolarPoint& q);

// Same quantity in correlation form, -(1/sigma2)(||y||^2 - |a^H y|^2 / N_B).
double ml_objective_corr(const Snapshot& snapshot, const ArrayGeometry& geom,
                         const PolarPoint& q);

// Least-squares gain a^H y / ||a||^2 at the candidate location.
ComplexGain ls_gain(const Snapshot& snapshot, const ArrayGeometry& geom, const PolarPoint& q);

// Analytic gradients of F for the two coordinate blocks.
Eigen::Vector2d gradient_angles(const Snapshot& snapshot, const ArrayGeometry& geom,
                                const PolarPoint& q);
double gradient_range(const Snapshot& snapshot, const ArrayGeometry& geom,
                      const PolarPoint& q);

// Block coordinate ascent over (omega, phi) and r with backtracking line
// search; monotone in F across accepted steps.
EapleResult bca_refine(const Snapshot& snapshot, const ArrayGeometry& geom,
                       const PolarPoint& init, const EapleConfig& cfg = {});

} // namespace nfloc

#endif
