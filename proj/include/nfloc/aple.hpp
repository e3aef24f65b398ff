#ifndef NFLOC_APLE_HPP
#define NFLOC_APLE_HPP

#include "nfloc/aoa_estimator.hpp"
#include "nfloc/channel.hpp"
#include "nfloc/fusion.hpp"
#include "nfloc/geometry.hpp"
#include "nfloc/vonmises.hpp"

#include <string>
#include <vector>

namespace nfloc {

struct ApleConfig {
    int t1 = 10;               // outer iterations
    int t2 = 50;               // per-subarray estimator iteration budget
    int tp = 100;              // ascent iterations per belief update
    double fusion_grad_tol = 1e-8;
    double estimator_grad_tol = 1e-10;
    double sigma_u2 = 1e6;     // location prior variance [m^2]
    double sigma_alpha2 = 1e6; // gain prior variance
};

struct ApleTraceRow {
    int iter = 0;
    double varpi_full = 0.0;
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
};

struct LocationEstimate {
    Eigen::Vector3d p_hat = Eigen::Vector3d::Zero();
    GaussianBelief3 belief;
    std::vector<AoaPosterior> posteriors; // per subarray, final iteration
    std::vector<ApleTraceRow> trace;
    std::vector<std::string> flags;
};

// Alternating AoA estimation and AoA fusion. The final estimate maximizes
// the full fusion objective (all 2M terms) under the final messages.
LocationEstimate run_aple(const Snapshot& snapshot, const ArrayGeometry& geom,
                          const PartitionPlan& plan, const ApleConfig& cfg = {});

} // namespace nfloc

#endif
