#include "nfloc/eaple.hpp"

#include "nfloc/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace nfloc;

namespace {

const ArrayGeometry kGeom(16, 16, 0.015, 0.015, 0.03);

Snapshot make_snapshot(const UeLocation& ue, double sigma2, std::uint64_t seed) {
    return synthesize_snapshot(kGeom, ue, ComplexGain::from_polar(1.0, 0.6), sigma2, seed);
}

} // namespace

TEST_CASE("residual and correlation forms of the objective agree") {
    const UeLocation ue = UeLocation::from_polar(6.0, 1.2, 0.5);
    const Snapshot snap = make_snapshot(ue, 0.01, 5);
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        PolarPoint q;
        q.r = 2.0 + 10.0 * unit(rng);
        q.omega = 2.0 * M_PI * unit(rng);
        q.phi = 0.5 * M_PI * 0.99 * unit(rng) + 1e-3;
        const double f_res = ml_objective(snap, kGeom, q);
        const double f_corr = ml_objective_corr(snap, kGeom, q);
        CHECK(std::abs(f_res - f_corr) <= 1e-10 * std::max(1.0, std::abs(f_res)));
    }
}

TEST_CASE("noiseless objective vanishes at the truth") {
    const UeLocation ue = UeLocation::from_polar(5.0, 0.8, 0.6);
    const Snapshot snap = make_snapshot(ue, 0.0, 0);
    PolarPoint q{ue.r, ue.omega, ue.phi};
    const double scale = snap.y.squaredNorm();
    CHECK(std::abs(ml_objective(snap, kGeom, q)) < 1e-10 * scale);
}

TEST_CASE("ls_gain is the least-squares minimizer") {
    const UeLocation ue = UeLocation::from_polar(4.0, 2.1, 0.7);
    const PolarPoint q{ue.r, ue.omega, ue.phi};
    const Eigen::VectorXcd a = nearfield_steering(kGeom, ue.cartesian);

    Snapshot exact;
    exact.y = std::polar(1.7, -0.9) * a;
    exact.noise_variance = 1.0;
    CHECK(std::abs(ls_gain(exact, kGeom, q).value - std::polar(1.7, -0.9)) < 1e-12);

    // A signal orthogonal to the steering vector has zero gain.
    Snapshot ortho;
    ortho.y = a;
    ortho.y(0) = -static_cast<double>(kGeom.antenna_count() - 1) * a(0);
    ortho.noise_variance = 1.0;
    CHECK(std::abs(a.dot(ortho.y)) < 1e-9 * a.norm() * ortho.y.norm());
    CHECK(std::abs(ls_gain(ortho, kGeom, q).value) < 1e-12 * ortho.y.norm());

    // Residual orthogonality in the noisy case.
    const Snapshot noisy = make_snapshot(ue, 0.1, 7);
    const std::complex<double> gain = ls_gain(noisy, kGeom, q).value;
    const std::complex<double> resid = a.dot(noisy.y - gain * a);
    CHECK(std::abs(resid) < 1e-10 * a.norm() * noisy.y.norm());
}

TEST_CASE("analytic block gradients match finite differences") {
    const UeLocation ue = UeLocation::from_polar(6.0, 0.9, 0.55);
    const Snapshot snap = make_snapshot(ue, 0.05, 11);
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        PolarPoint q;
        q.r = 3.0 + 6.0 * unit(rng);
        q.omega = 2.0 * M_PI * unit(rng);
        q.phi = 0.1 + 1.3 * unit(rng);

        const Eigen::Vector2d g = gradient_angles(snap, kGeom, q);
        const double h = 1e-7 * (1.0 + std::abs(q.omega) + std::abs(q.phi));
        auto f_at = [&](double omega, double phi, double r) {
            PolarPoint qq{r, omega, phi};
            return ml_objective_corr(snap, kGeom, qq);
        };
        const double g_omega_fd =
            (f_at(q.omega + h, q.phi, q.r) - f_at(q.omega - h, q.phi, q.r)) / (2.0 * h);
        const double g_phi_fd =
            (f_at(q.omega, q.phi + h, q.r) - f_at(q.omega, q.phi - h, q.r)) / (2.0 * h);
        const double scale = 1.0 + g.norm();
        CHECK(std::abs(g(0) - g_omega_fd) < 1e-5 * scale);
        CHECK(std::abs(g(1) - g_phi_fd) < 1e-5 * scale);

        const double gr = gradient_range(snap, kGeom, q);
        const double hr = 1e-7 * (1.0 + q.r);
        const double gr_fd = (f_at(q.omega, q.phi, q.r + hr) - f_at(q.omega, q.phi, q.r - hr)) /
                             (2.0 * hr);
        CHECK(std::abs(gr - gr_fd) < 1e-5 * (1.0 + std::abs(gr)));
    }
}

TEST_CASE("gradient vanishes at a noiseless optimum") {
    const UeLocation ue = UeLocation::from_polar(5.5, 1.4, 0.35);
    const Snapshot snap = make_snapshot(ue, 0.0, 0);
    const PolarPoint q{ue.r, ue.omega, ue.phi};
    const Eigen::Vector2d g = gradient_angles(snap, kGeom, q);
    const double gr = gradient_range(snap, kGeom, q);
    // Scale: the objective curvature is ~ k^2 |y|^2; rounding leaves a tiny
    // residual gradient.
    const double scale = snap.y.squaredNorm() * 2.0 * M_PI / kGeom.wavelength;
    CHECK(g.norm() < 1e-7 * scale);
    CHECK(std::abs(gr) < 1e-7 * scale);
}

TEST_CASE("angle gradient is invariant to a unit rescaling of y") {
    const UeLocation ue = UeLocation::from_polar(7.0, 0.4, 0.8);
    Snapshot snap = make_snapshot(ue, 0.02, 13);
    PolarPoint q{6.8, 0.5, 0.75};
    const Eigen::Vector2d g1 = gradient_angles(snap, kGeom, q);
    snap.y *= std::polar(1.0, 1.234);
    const Eigen::Vector2d g2 = gradient_angles(snap, kGeom, q);
    CHECK((g1 - g2).norm() < 1e-9 * (1.0 + g1.norm()));
}

TEST_CASE("bca_refine: stationary truth, monotone trace, consistency") {
    const UeLocation ue = UeLocation::from_polar(5.0, 2.3, 0.4);
    const Snapshot clean = make_snapshot(ue, 0.0, 0);

    const PolarPoint truth{ue.r, ue.omega, ue.phi};
    const EapleResult stay = bca_refine(clean, kGeom, truth);
    CHECK((stay.p_hat - ue.cartesian).norm() < 1e-6);

    // Monotone ascent from a perturbed start.
    PolarPoint off{ue.r * 1.05, ue.omega + 0.02, ue.phi - 0.015};
    const EapleResult res = bca_refine(clean, kGeom, off);
    for (std::size_t i = 1; i < res.trace.size(); ++i) {
        CHECK(res.trace[i].f >= res.trace[i - 1].f - 1e-9 * std::abs(res.trace[i - 1].f));
    }
    CHECK((res.p_hat - ue.cartesian).norm() < 1e-4);
}
