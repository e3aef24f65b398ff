#include "nfloc/aple.hpp"

#include "nfloc/eaple.hpp"

#include <doctest.h>

#include <cmath>

using namespace nfloc;

namespace {

const ArrayGeometry kGeom(40, 40, 0.015, 0.015, 0.03);

} // namespace

TEST_CASE("noiseless run lands near the truth and records its trace") {
    const PartitionPlan plan = partition(kGeom, 2, 2);
    const UeLocation ue = UeLocation::from_polar(20.0, 0.8, 0.35);
    const Snapshot snap =
        synthesize_snapshot(kGeom, ue, ComplexGain::from_polar(1.0, 0.2), 0.0, 0);

    ApleConfig cfg;
    const LocationEstimate est = run_aple(snap, kGeom, plan, cfg);
    CHECK(static_cast<int>(est.trace.size()) == cfg.t1);
    // Residual error is the planar-model mismatch floor, well under a meter
    // at this aperture and range.
    CHECK((est.p_hat - ue.cartesian).norm() < 0.5);

    // Per-subarray posteriors follow the true look directions.
    for (int m = 1; m <= plan.count(); ++m) {
        const Eigen::Vector3d d = ue.cartesian - plan.subarray_centers[m - 1];
        const double tx = d.x() / d.norm();
        CHECK(std::abs(vm_mode_theta(est.posteriors[m - 1].theta_x) - tx) < 5e-3);
    }
}

TEST_CASE("noisy run stays within a few mismatch floors") {
    const PartitionPlan plan = partition(kGeom, 2, 2);
    const UeLocation ue = UeLocation::from_polar(15.0, 4.0, 0.6);
    const double sigma2 = 1.0;
    const double snr_db = 20.0;
    const Snapshot snap = synthesize_snapshot(
        kGeom, ue, ComplexGain::from_polar(std::pow(10.0, snr_db / 20.0), 1.0), sigma2, 3);
    const LocationEstimate est = run_aple(snap, kGeom, plan, ApleConfig{});
    CHECK((est.p_hat - ue.cartesian).norm() < 2.0);
}

TEST_CASE("a single subarray cannot fix the range and reports it") {
    const PartitionPlan plan = partition(kGeom, 1, 1);
    const UeLocation ue = UeLocation::from_polar(10.0, 1.0, 0.3);
    const Snapshot snap =
        synthesize_snapshot(kGeom, ue, ComplexGain::from_polar(1.0, 0.0), 0.0, 0);
    const LocationEstimate est = run_aple(snap, kGeom, plan, ApleConfig{});
    CHECK(std::find(est.flags.begin(), est.flags.end(),
                    "single_subarray_range_ambiguous") != est.flags.end());
    // The direction still matches even though the range is arbitrary.
    CHECK(est.p_hat.normalized().dot(ue.cartesian.normalized()) > 0.99);
}

TEST_CASE("noiseless consistency of the ML refinement from the message-passing init") {
    const PartitionPlan plan = partition(kGeom, 2, 2);
    const UeLocation ue = UeLocation::from_polar(12.0, 2.5, 0.45);
    const Snapshot snap =
        synthesize_snapshot(kGeom, ue, ComplexGain::from_polar(1.0, -0.7), 0.0, 0);
    const LocationEstimate aple_est = run_aple(snap, kGeom, plan, ApleConfig{});
    const EapleResult refined =
        bca_refine(snap, kGeom, PolarPoint::from_cartesian(aple_est.p_hat), EapleConfig{});
    CHECK((refined.p_hat - ue.cartesian).norm() < 1e-4);
}
