#include "nfloc/bounds.hpp"

#include "nfloc/channel.hpp"
#include "nfloc/vonmises.hpp"

#include <cmath>
#include <stdexcept>

namespace nfloc {

namespace {

constexpr std::complex<double> kJ{0.0, 1.0};

// Per-subarray element offsets (k~ d_x, l~ d_y), identical for every block.
struct SubarrayOffsets {
    Eigen::ArrayXd off_x;
    Eigen::ArrayXd off_y;

    SubarrayOffsets(const PartitionPlan& plan) {
        const int n_m = plan.antennas_per_subarray();
        off_x.resize(n_m);
        off_y.resize(n_m);
        for (int k = 1; k <= plan.n_mx; ++k) {
            for (int l = 1; l <= plan.n_my; ++l) {
                const int e = (k - 1) * plan.n_my + (l - 1);
                off_x(e) = (k - 0.5 * (plan.n_mx + 1)) * plan.parent.d_x;
                off_y(e) = (l - 0.5 * (plan.n_my + 1)) * plan.parent.d_y;
            }
        }
    }
};

// Direction cosines of (c_m - p) and their gradients w.r.t. p.
struct SubarrayLook {
    double rho = 0.0;
    Eigen::Vector3d e_n;
    double theta_x = 0.0;
    double theta_y = 0.0;
    Eigen::Vector3d grad_theta_x;
    Eigen::Vector3d grad_theta_y;
};

SubarrayLook subarray_look(const Eigen::Vector3d& center, const Eigen::Vector3d& p) {
    SubarrayLook look;
    const Eigen::Vector3d q = center - p;
    look.rho = q.norm();
    if (look.rho < 1e-12) {
        throw std::domain_error("bounds: location coincides with a subarray center");
    }
    look.e_n = q / look.rho;
    look.theta_x = look.e_n.x();
    look.theta_y = look.e_n.y();
    look.grad_theta_x = look.theta_x * look.e_n;
    look.grad_theta_x.x() -= 1.0;
    look.grad_theta_x /= look.rho;
    look.grad_theta_y = look.theta_y * look.e_n;
    look.grad_theta_y.y() -= 1.0;
    look.grad_theta_y /= look.rho;
    return look;
}

// Planar-wave block steering for one subarray, element
// exp(-j k (off_x theta_x + off_y theta_y)).
Eigen::VectorXcd block_steering(const SubarrayOffsets& off, double k_wave, double theta_x,
                                double theta_y) {
    const int n_m = static_cast<int>(off.off_x.size());
    Eigen::VectorXcd g(n_m);
    for (int e = 0; e < n_m; ++e) {
        g(e) = std::polar(1.0, -k_wave * (off.off_x(e) * theta_x + off.off_y(e) * theta_y));
    }
    return g;
}

} // namespace

Eigen::VectorXd MisParam::to_vector() const {
    Eigen::VectorXd v(dim());
    v.head<3>() = p_u;
    v.tail(gains.size()) = gains;
    return v;
}

MisParam MisParam::from_vector(const Eigen::VectorXd& v) {
    MisParam g;
    g.p_u = v.head<3>();
    g.gains = v.tail(v.size() - 3);
    return g;
}

Matrix5d fim(const ArrayGeometry& geom, const TrueParam& truth, double sigma2) {
    if (sigma2 <= 0.0) throw std::invalid_argument("fim: sigma2 must be positive");
    const double k_wave = 2.0 * M_PI / geom.wavelength;
    const std::complex<double> alpha = truth.alpha();
    const std::complex<double> phase_unit = std::polar(1.0, truth.angle_alpha);
    Eigen::MatrixXcd d(geom.antenna_count(), 5);
    for (int i = 1; i <= geom.n_x; ++i) {
        for (int j = 1; j <= geom.n_y; ++j) {
            const int t = flat_index(geom, i, j) - 1;
            const Eigen::Vector3d pos = antenna_position(geom, i, j);
            const Eigen::Vector3d diff = truth.p_u - pos;
            const double r = diff.norm();
            if (r < 1e-12) throw std::domain_error("fim: UE coincides with an antenna");
            const std::complex<double> mu_t = alpha * std::polar(1.0, -k_wave * r);
            const std::complex<double> pref = -kJ * k_wave * mu_t / r;
            d(t, 0) = pref * diff.x();
            d(t, 1) = pref * diff.y();
            d(t, 2) = pref * diff.z();
            d(t, 3) = kJ * mu_t;                                   // d / d angle(alpha)
            d(t, 4) = phase_unit * std::polar(1.0, -k_wave * r);   // d / d |alpha|
        }
    }
    Matrix5d j = (2.0 / sigma2) * (d.adjoint() * d).real();
    return 0.5 * (j + j.transpose());
}

double crb_position(const Matrix5d& j) {
    Eigen::SelfAdjointEigenSolver<Matrix5d> es(j);
    const double lambda_max = es.eigenvalues().cwiseAbs().maxCoeff();
    const double lambda_min = es.eigenvalues().cwiseAbs().minCoeff();
    if (!(lambda_min > 1e-14 * lambda_max)) {
        throw std::runtime_error("crb_position: singular information matrix, condition ~" +
                                 std::to_string(lambda_max / std::max(lambda_min, 1e-300)));
    }
    const Matrix5d inv = es.eigenvectors() *
                         es.eigenvalues().cwiseInverse().asDiagonal() *
                         es.eigenvectors().transpose();
    return std::sqrt(inv.topLeftCorner<3, 3>().trace());
}

Eigen::VectorXcd exact_subarray_mean(const TrueParam& truth, const ArrayGeometry& geom,
                                     const PartitionPlan& plan) {
    const double k_wave = 2.0 * M_PI / geom.wavelength;
    const std::complex<double> alpha = truth.alpha();
    const int n_m = plan.antennas_per_subarray();
    Eigen::VectorXcd mu(geom.antenna_count());
    int row = 0;
    for (int m = 0; m < plan.count(); ++m) {
        for (int e = 0; e < n_m; ++e) {
            const int flat = plan.subarray_flat_indices[m][e];
            const int i = (flat - 1) / geom.n_y + 1;
            const int j = (flat - 1) % geom.n_y + 1;
            const double r = (antenna_position(geom, i, j) - truth.p_u).norm();
            mu(row++) = alpha * std::polar(1.0, -k_wave * r);
        }
    }
    return mu;
}

Eigen::VectorXcd planar_subarray_mean(const MisParam& gamma, const ArrayGeometry& geom,
                                      const PartitionPlan& plan) {
    const double k_wave = 2.0 * M_PI / geom.wavelength;
    const SubarrayOffsets off(plan);
    const int n_m = plan.antennas_per_subarray();
    Eigen::VectorXcd mu(geom.antenna_count());
    for (int m = 0; m < plan.count(); ++m) {
        const SubarrayLook look = subarray_look(plan.subarray_centers[m], gamma.p_u);
        const std::complex<double> alpha_m =
            std::polar(gamma.gains(2 * m + 1), gamma.gains(2 * m));
        mu.segment(m * n_m, n_m) =
            alpha_m * block_steering(off, k_wave, look.theta_x, look.theta_y);
    }
    return mu;
}

Eigen::MatrixXcd planar_subarray_jacobian(const MisParam& gamma, const ArrayGeometry& geom,
                                          const PartitionPlan& plan) {
    const double k_wave = 2.0 * M_PI / geom.wavelength;
    const SubarrayOffsets off(plan);
    const int n_m = plan.antennas_per_subarray();
    const int dim = gamma.dim();
    Eigen::MatrixXcd jac = Eigen::MatrixXcd::Zero(geom.antenna_count(), dim);
    for (int m = 0; m < plan.count(); ++m) {
        const SubarrayLook look = subarray_look(plan.subarray_centers[m], gamma.p_u);
        const double angle_m = gamma.gains(2 * m);
        const double mag_m = gamma.gains(2 * m + 1);
        const std::complex<double> alpha_m = std::polar(mag_m, angle_m);
        const Eigen::VectorXcd g = block_steering(off, k_wave, look.theta_x, look.theta_y);
        for (int e = 0; e < n_m; ++e) {
            const int row = m * n_m + e;
            const std::complex<double> val = alpha_m * g(e);
            const Eigen::Vector3d phase_grad =
                off.off_x(e) * look.grad_theta_x + off.off_y(e) * look.grad_theta_y;
            const std::complex<double> pref = -kJ * k_wave * val;
            jac(row, 0) = pref * phase_grad.x();
            jac(row, 1) = pref * phase_grad.y();
            jac(row, 2) = pref * phase_grad.z();
            jac(row, 3 + 2 * m) = kJ * val;
            jac(row, 3 + 2 * m + 1) = std::polar(1.0, angle_m) * g(e);
        }
    }
    return jac;
}

Eigen::VectorXd mismatch_gradient(const TrueParam& truth, const MisParam& gamma,
                                  const ArrayGeometry& geom, const PartitionPlan& plan) {
    const Eigen::VectorXcd eps =
        exact_subarray_mean(truth, geom, plan) - planar_subarray_mean(gamma, geom, plan);
    const Eigen::MatrixXcd jac = planar_subarray_jacobian(gamma, geom, plan);
    return -2.0 * (jac.adjoint() * eps).real();
}

MisParam gamma_truth(const TrueParam& truth, const ArrayGeometry& geom,
                     const PartitionPlan& plan) {
    MisParam g;
    g.p_u = truth.p_u;
    g.gains.resize(2 * plan.count());
    for (int m = 0; m < plan.count(); ++m) {
        const double r_m = (truth.p_u - plan.subarray_centers[m]).norm();
        g.gains(2 * m) =
            wrap_angle(truth.angle_alpha - 2.0 * M_PI * r_m / geom.wavelength);
        g.gains(2 * m + 1) = truth.mag_alpha;
    }
    return g;
}

MisParam pseudo_true(const TrueParam& truth, const ArrayGeometry& geom,
                     const PartitionPlan& plan) {
    const double k_wave = 2.0 * M_PI / geom.wavelength;
    const SubarrayOffsets off(plan);
    const int n_m = plan.antennas_per_subarray();
    const int m_total = plan.count();
    const Eigen::VectorXcd mu_n = exact_subarray_mean(truth, geom, plan);
    const double mu_scale = std::max(1.0, mu_n.squaredNorm());

    // Profile over the gains: h(p) = sum_m |g_m(p)^H mu_m|^2 / N_m is the
    // part of |mu_N|^2 captured by the planar model at location p.
    auto profiled = [&](const Eigen::Vector3d& p, Eigen::Vector3d* grad) {
        double h = 0.0;
        if (grad) grad->setZero();
        for (int m = 0; m < m_total; ++m) {
            const SubarrayLook look = subarray_look(plan.subarray_centers[m], p);
            const Eigen::VectorXcd g = block_steering(off, k_wave, look.theta_x, look.theta_y);
            std::complex<double> b = 0.0, s_x = 0.0, s_y = 0.0;
            for (int e = 0; e < n_m; ++e) {
                const std::complex<double> w = std::conj(g(e)) * mu_n(m * n_m + e);
                b += w;
                s_x += off.off_x(e) * w;
                s_y += off.off_y(e) * w;
            }
            h += std::norm(b) / n_m;
            if (grad) {
                const double cx = std::imag(std::conj(b) * s_x);
                const double cy = std::imag(std::conj(b) * s_y);
                *grad += (-2.0 * k_wave / n_m) *
                         (cx * look.grad_theta_x + cy * look.grad_theta_y);
            }
        }
        return h;
    };

    Eigen::Vector3d p = truth.p_u;
    double h_cur = profiled(p, nullptr);
    for (int it = 0; it < 120; ++it) {
        Eigen::Vector3d grad;
        profiled(p, &grad);
        const double scaled = grad.norm() * geom.wavelength / mu_scale;
        if (scaled < 1e-12) break;

        // Second-order step from a finite-difference Hessian of the gradient.
        Eigen::Matrix3d hess;
        const double fd = 1e-7 * (1.0 + p.norm());
        for (int a = 0; a < 3; ++a) {
            Eigen::Vector3d pp = p, pm = p;
            pp(a) += fd;
            pm(a) -= fd;
            Eigen::Vector3d gp, gm;
            profiled(pp, &gp);
            profiled(pm, &gm);
            hess.col(a) = (gp - gm) / (2.0 * fd);
        }
        hess = 0.5 * (hess + hess.transpose());
        Eigen::Vector3d dir;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(-hess);
        if (es.eigenvalues().minCoeff() > 0.0) {
            const Eigen::Vector3d proj = es.eigenvectors().transpose() * grad;
            dir = es.eigenvectors() * proj.cwiseQuotient(es.eigenvalues());
        } else {
            dir = grad * (geom.wavelength / std::max(grad.norm(), 1e-300));
        }
        const double slope = grad.dot(dir);
        if (slope <= 0.0) break;
        double step = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            const Eigen::Vector3d trial = p + step * dir;
            const double h_trial = profiled(trial, nullptr);
            if (h_trial >= h_cur + 1e-4 * step * slope) {
                p = trial;
                h_cur = h_trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }

    MisParam gamma0;
    gamma0.p_u = p;
    gamma0.gains.resize(2 * m_total);
    for (int m = 0; m < m_total; ++m) {
        const SubarrayLook look = subarray_look(plan.subarray_centers[m], p);
        const Eigen::VectorXcd g = block_steering(off, k_wave, look.theta_x, look.theta_y);
        const std::complex<double> alpha_m =
            g.dot(mu_n.segment(m * n_m, n_m)) / static_cast<double>(n_m);
        gamma0.gains(2 * m) = std::arg(alpha_m);
        gamma0.gains(2 * m + 1) = std::abs(alpha_m);
    }
    return gamma0;
}

BoundReport mcrb(const TrueParam& truth, const MisParam& gamma0, const ArrayGeometry& geom,
                 const PartitionPlan& plan, double sigma2) {
    if (sigma2 <= 0.0) throw std::invalid_argument("mcrb: sigma2 must be positive");
    BoundReport report;
    report.pseudo_true = gamma0;
    report.fim = fim(geom, truth, sigma2);
    report.crb_pos = crb_position(report.fim);

    const int dim = gamma0.dim();
    const Eigen::VectorXcd mu_n = exact_subarray_mean(truth, geom, plan);
    const Eigen::VectorXcd eps = mu_n - planar_subarray_mean(gamma0, geom, plan);
    const Eigen::MatrixXcd jac = planar_subarray_jacobian(gamma0, geom, plan);
    const Eigen::MatrixXd gram = (jac.adjoint() * jac).real();

    // Curvature term Re[eps^H d2 mu / dgamma_a dgamma_b] by central
    // differences of the analytic Jacobian.
    Eigen::MatrixXd curv(dim, dim);
    const Eigen::VectorXd v0 = gamma0.to_vector();
    for (int b = 0; b < dim; ++b) {
        const double h = 1e-6 * (1.0 + std::abs(v0(b)));
        Eigen::VectorXd vp = v0, vm = v0;
        vp(b) += h;
        vm(b) -= h;
        const Eigen::MatrixXcd jp = planar_subarray_jacobian(MisParam::from_vector(vp), geom, plan);
        const Eigen::MatrixXcd jm = planar_subarray_jacobian(MisParam::from_vector(vm), geom, plan);
        curv.col(b) = (eps.adjoint() * ((jp - jm) / (2.0 * h))).real().transpose();
    }
    curv = 0.5 * (curv + curv.transpose());

    report.a_mat = (2.0 / sigma2) * (curv - gram);
    const Eigen::VectorXd w = (jac.adjoint() * eps).real();
    report.b_mat = (4.0 / (sigma2 * sigma2)) * (w * w.transpose()) + (2.0 / sigma2) * gram;
    report.a_mat = 0.5 * (report.a_mat + report.a_mat.transpose());
    report.b_mat = 0.5 * (report.b_mat + report.b_mat.transpose());

    // Inverse of A through its eigendecomposition; near-zero modes get a
    // floored magnitude and raise the regularization flag.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(report.a_mat);
    const double lambda_max = es.eigenvalues().cwiseAbs().maxCoeff();
    const double floor = 1e-12 * std::max(lambda_max, 1e-300);
    Eigen::VectorXd inv_vals(dim);
    for (int i = 0; i < dim; ++i) {
        double lambda = es.eigenvalues()(i);
        if (std::abs(lambda) < floor) {
            lambda = (lambda < 0.0 ? -floor : floor);
            report.a_regularized = true;
        }
        inv_vals(i) = 1.0 / lambda;
    }
    const Eigen::MatrixXd a_inv =
        es.eigenvectors() * inv_vals.asDiagonal() * es.eigenvectors().transpose();

    const MisParam bar = gamma_truth(truth, geom, plan);
    Eigen::VectorXd delta = bar.to_vector() - v0;
    for (int m = 0; m < plan.count(); ++m) {
        delta(3 + 2 * m) = wrap_angle(delta(3 + 2 * m)); // gain angles are circular
    }
    report.mcrb = a_inv * report.b_mat * a_inv + delta * delta.transpose();
    report.mcrb_pos = std::sqrt(std::max(0.0, report.mcrb.topLeftCorner<3, 3>().trace()));
    return report;
}

} // namespace nfloc
