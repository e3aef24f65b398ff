#include "nfloc/fusion.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace nfloc;

namespace {

PartitionPlan quad_plan() {
    const ArrayGeometry geom(40, 40, 0.015, 0.015, 0.03);
    return partition(geom, 2, 2);
}

// Messages whose means are the exact geometric angles seen from p.
std::vector<VonMisesMessage> exact_messages(const PartitionPlan& plan,
                                            const Eigen::Vector3d& p, double kappa) {
    std::vector<VonMisesMessage> msgs(2 * plan.count());
    for (int m = 1; m <= plan.count(); ++m) {
        const Eigen::Vector3d q = plan.subarray_centers[m - 1] - p;
        const Eigen::Vector3d e_n = q / q.norm();
        msgs[fusion_slot(m, 0)] = VonMisesMessage(M_PI * e_n.x(), kappa);
        msgs[fusion_slot(m, 1)] = VonMisesMessage(M_PI * e_n.y(), kappa);
    }
    return msgs;
}

// Term-by-term re-implementation used as the value oracle.
double varpi_oracle(const Eigen::Vector3d& p, const PartitionPlan& plan,
                    const std::vector<VonMisesMessage>& msgs, int exclude) {
    double total = 0.0;
    for (int m = 1; m <= plan.count(); ++m) {
        for (int axis = 0; axis < 2; ++axis) {
            const int idx = fusion_slot(m, axis);
            if (idx == exclude) continue;
            const Eigen::Vector3d diff = plan.subarray_centers[m - 1] - p;
            const double theta = diff(axis) / diff.norm();
            total += msgs[idx].kappa * std::cos(M_PI * theta - msgs[idx].mu);
        }
    }
    return total;
}

} // namespace

TEST_CASE("varpi value against a term-by-term oracle") {
    const PartitionPlan plan = quad_plan();
    const std::vector<VonMisesMessage> zeros(8, VonMisesMessage::uniform());
    CHECK(varpi(Eigen::Vector3d(1, 2, 3), plan, zeros) == 0.0);

    const Eigen::Vector3d truth(2.0, -1.0, 12.0);
    auto msgs = exact_messages(plan, truth, 7.5);
    CHECK(varpi(truth, plan, msgs) == doctest::Approx(8 * 7.5));

    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::Vector3d p(4.0 * unit(rng), 4.0 * unit(rng), 8.0 + 4.0 * unit(rng));
        std::vector<VonMisesMessage> random_msgs(8);
        for (auto& m : random_msgs) {
            m = VonMisesMessage(M_PI * unit(rng), 10.0 * std::abs(unit(rng)));
        }
        const int exclude = rep % 9 - 1; // sometimes -1 (keep all)
        CHECK(varpi(p, plan, random_msgs, exclude) ==
              doctest::Approx(varpi_oracle(p, plan, random_msgs, exclude)).epsilon(1e-12));
    }

    CHECK_THROWS_AS(varpi(plan.subarray_centers[0], plan, msgs), std::domain_error);
}

TEST_CASE("leave-one-out term plus excluded term equals the full objective") {
    const PartitionPlan plan = quad_plan();
    const Eigen::Vector3d truth(1.0, 2.0, 15.0);
    const auto msgs = exact_messages(plan, truth, 3.0);
    const Eigen::Vector3d p(0.5, -0.3, 10.0);
    for (int idx = 0; idx < 8; ++idx) {
        std::vector<VonMisesMessage> only(8, VonMisesMessage::uniform());
        only[idx] = msgs[idx];
        const double term = varpi(p, plan, only);
        CHECK(varpi(p, plan, msgs, idx) + term == doctest::Approx(varpi(p, plan, msgs)));
    }
}

TEST_CASE("analytic gradient and Hessian match central finite differences") {
    const PartitionPlan plan = quad_plan();
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        const Eigen::Vector3d p(3.0 * unit(rng), 3.0 * unit(rng), 9.0 + 3.0 * unit(rng));
        std::vector<VonMisesMessage> msgs(8);
        for (auto& m : msgs) m = VonMisesMessage(M_PI * unit(rng), 5.0 + 5.0 * unit(rng));

        const double h = 1e-6 * (1.0 + p.norm());
        const Eigen::Vector3d g = varpi_gradient(p, plan, msgs);
        Eigen::Vector3d g_fd;
        for (int a = 0; a < 3; ++a) {
            Eigen::Vector3d pp = p, pm = p;
            pp(a) += h;
            pm(a) -= h;
            g_fd(a) = (varpi(pp, plan, msgs) - varpi(pm, plan, msgs)) / (2.0 * h);
        }
        CHECK((g - g_fd).norm() < 1e-5 * (1.0 + g.norm()));

        const Eigen::Matrix3d hess = varpi_hessian(p, plan, msgs);
        CHECK((hess - hess.transpose()).cwiseAbs().maxCoeff() <
              1e-10 * (1.0 + hess.cwiseAbs().maxCoeff()));
        Eigen::Matrix3d h_fd;
        for (int a = 0; a < 3; ++a) {
            Eigen::Vector3d pp = p, pm = p;
            pp(a) += h;
            pm(a) -= h;
            h_fd.col(a) = (varpi_gradient(pp, plan, msgs) - varpi_gradient(pm, plan, msgs)) /
                          (2.0 * h);
        }
        CHECK((hess - h_fd).cwiseAbs().maxCoeff() <
              1e-4 * (1.0 + hess.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("maximize_varpi recovers a triangulated source") {
    const PartitionPlan plan = quad_plan();
    const Eigen::Vector3d truth(3.0, -2.0, 18.0);
    const auto msgs = exact_messages(plan, truth, 1e4);

    // Starting at the maximizer stays there.
    const VarpiMax at_max = maximize_varpi(truth, plan, msgs, -1);
    CHECK((at_max.p - truth).norm() < 1e-6);

    // From a coarse start the ascent must land on the true location.
    const Eigen::Vector3d init = truth * (5.0 / truth.norm());
    FusionOpts opts;
    opts.max_iters = 4000;
    const VarpiMax res = maximize_varpi(init, plan, msgs, -1, opts);
    CHECK(res.value >= varpi(init, plan, msgs));
    CHECK((res.p - truth).norm() < 1e-4);
}

TEST_CASE("gaussian_belief inverts the negated Hessian") {
    const GaussianBelief3 iso = gaussian_belief(Eigen::Vector3d(1, 2, 3),
                                                -Eigen::Matrix3d::Identity());
    CHECK((iso.cov - Eigen::Matrix3d::Identity()).norm() < 1e-12);

    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    h.diagonal() << -4.0, -1.0, -1.0;
    const GaussianBelief3 diag = gaussian_belief(Eigen::Vector3d::Zero(), h);
    CHECK(diag.cov(0, 0) == doctest::Approx(0.25));
    CHECK(diag.cov(1, 1) == doctest::Approx(1.0));

    std::mt19937_64 rng(17);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::Matrix3d a;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) a(i, j) = gauss(rng);
        }
        const Eigen::Matrix3d s = a * a.transpose() + 0.1 * Eigen::Matrix3d::Identity();
        const GaussianBelief3 b = gaussian_belief(Eigen::Vector3d::Zero(), -s);
        CHECK((b.cov * s - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-10 *
              (1.0 + s.norm()));
    }

    // A non-PD -H gets regularized and flagged.
    bool regularized = false;
    Eigen::Matrix3d bad = Eigen::Matrix3d::Zero();
    bad.diagonal() << -1.0, -1.0, 1e-3;
    gaussian_belief(Eigen::Vector3d::Zero(), bad, &regularized);
    CHECK(regularized);
}

TEST_CASE("projection_message kappa and degeneracy handling") {
    const Eigen::Vector3d center(0.3, -0.2, 0.0);
    const Eigen::Vector3d mean(2.0, 1.0, 9.0);
    const Eigen::Vector3d u_bar = center - mean;

    // Isotropic covariance: kappa = |u|^2 / (pi^2 (1 - theta^2) c).
    const double c = 0.04;
    const GaussianBelief3 belief(mean, c * Eigen::Matrix3d::Identity());
    const VonMisesMessage mx = projection_message(belief, center, 0);
    const double theta = u_bar.x() / u_bar.norm();
    CHECK(mx.mu == doctest::Approx(M_PI * theta));
    CHECK(mx.kappa ==
          doctest::Approx(u_bar.squaredNorm() / (M_PI * M_PI * (1.0 - theta * theta) * c)));

    // Shrinking the covariance by 10 scales kappa by 10 exactly.
    const GaussianBelief3 tight(mean, (c / 10.0) * Eigen::Matrix3d::Identity());
    CHECK(projection_message(tight, center, 0).kappa == doctest::Approx(10.0 * mx.kappa));

    // The projection direction is a unit vector orthogonal to u_bar.
    std::mt19937_64 rng(29);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        const Eigen::Vector3d m(gauss(rng), gauss(rng), 5.0 + std::abs(gauss(rng)));
        const Eigen::Vector3d u = center - m;
        for (int axis = 0; axis < 2; ++axis) {
            Eigen::Vector3d e_u = Eigen::Vector3d::Zero();
            e_u(axis) = 1.0;
            const Eigen::Vector3d w = (u.cross(e_u)).cross(u);
            if (w.norm() < 1e-9) continue;
            const Eigen::Vector3d v = w / w.norm();
            CHECK(std::abs(v.dot(u)) < 1e-12 * u.norm());
            CHECK(std::abs(v.norm() - 1.0) < 1e-12);
        }
    }

    // u_bar parallel to the axis: degenerate, uniform message.
    bool degenerate = false;
    const GaussianBelief3 axial(Eigen::Vector3d(-5.0, -0.2, 0.0), c * Eigen::Matrix3d::Identity());
    const VonMisesMessage deg = projection_message(axial, center, 0, &degenerate);
    CHECK(degenerate);
    CHECK(deg.kappa == 0.0);
}

TEST_CASE("triangulate_init lands near the bearing ray") {
    const PartitionPlan plan = quad_plan();
    const Eigen::Vector3d truth(2.0, 1.0, 16.0);
    const auto msgs = exact_messages(plan, truth, 100.0);
    const double nominal = 5.0;
    const Eigen::Vector3d init = triangulate_init(plan, msgs, nominal);
    CHECK(init.z() > 0.0);
    // Angle between the init and the true direction stays small.
    const double cosang = init.normalized().dot(truth.normalized());
    CHECK(cosang > 0.995);
}
