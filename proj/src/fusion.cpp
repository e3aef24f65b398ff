#include "nfloc/fusion.hpp"

#include <cmath>
#include <stdexcept>

namespace nfloc {

namespace {

struct Term {
    double rho = 0.0;          // |p_bs - p|
    Eigen::Vector3d e_n;       // (p_bs - p) / rho
    double theta = 0.0;        // e_n' e_v
    double cosd = 0.0;         // cos(pi*theta - mu)
    double sind = 0.0;         // sin(pi*theta - mu)
    Eigen::Vector3d u;         // gradient of theta w.r.t. p
};

Term term_geometry(const Eigen::Vector3d& p, const Eigen::Vector3d& center, int axis,
                   const VonMisesMessage& msg) {
    Term t;
    const Eigen::Vector3d q = center - p;
    t.rho = q.norm();
    if (t.rho < 1e-12) {
        throw std::domain_error("varpi: point coincides with a subarray center");
    }
    t.e_n = q / t.rho;
    t.theta = t.e_n(axis);
    const double arg = M_PI * t.theta - msg.mu;
    t.cosd = std::cos(arg);
    t.sind = std::sin(arg);
    t.u = t.theta * t.e_n;
    t.u(axis) -= 1.0;
    t.u /= t.rho;
    return t;
}

} // namespace

double varpi(const Eigen::Vector3d& p, const PartitionPlan& plan,
             const std::vector<VonMisesMessage>& msgs, int exclude) {
    double acc = 0.0;
    for (int idx = 0; idx < static_cast<int>(msgs.size()); ++idx) {
        if (idx == exclude || msgs[idx].kappa == 0.0) continue;
        const Term t = term_geometry(p, plan.subarray_centers[idx / 2], idx % 2, msgs[idx]);
        acc += msgs[idx].kappa * t.cosd;
    }
    return acc;
}

Eigen::Vector3d varpi_gradient(const Eigen::Vector3d& p, const PartitionPlan& plan,
                               const std::vector<VonMisesMessage>& msgs, int exclude) {
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    for (int idx = 0; idx < static_cast<int>(msgs.size()); ++idx) {
        if (idx == exclude || msgs[idx].kappa == 0.0) continue;
        const Term t = term_geometry(p, plan.subarray_centers[idx / 2], idx % 2, msgs[idx]);
        g += (-M_PI * msgs[idx].kappa * t.sind) * t.u;
    }
    return g;
}

Eigen::Matrix3d varpi_hessian(const Eigen::Vector3d& p, const PartitionPlan& plan,
                              const std::vector<VonMisesMessage>& msgs, int exclude) {
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (int idx = 0; idx < static_cast<int>(msgs.size()); ++idx) {
        if (idx == exclude || msgs[idx].kappa == 0.0) continue;
        const int axis = idx % 2;
        const double kappa = msgs[idx].kappa;
        const Term t = term_geometry(p, plan.subarray_centers[idx / 2], axis, msgs[idx]);
        h += (-M_PI * M_PI * kappa * t.cosd) * (t.u * t.u.transpose());

        Eigen::Matrix3d grad_u = 3.0 * t.theta * (t.e_n * t.e_n.transpose());
        grad_u -= t.theta * Eigen::Matrix3d::Identity();
        grad_u.col(axis) -= t.e_n;
        grad_u.row(axis) -= t.e_n.transpose();
        h += (-M_PI * kappa * t.sind / (t.rho * t.rho)) * grad_u;
    }
    return h;
}

VarpiMax maximize_varpi(const Eigen::Vector3d& init, const PartitionPlan& plan,
                        const std::vector<VonMisesMessage>& msgs, int exclude,
                        const FusionOpts& opts) {
    VarpiMax res;
    res.p = init;
    res.value = varpi(res.p, plan, msgs, exclude);
    if (!std::isfinite(res.value)) {
        throw std::runtime_error("maximize_varpi: non-finite objective at the start point");
    }
    for (int it = 0; it < opts.max_iters; ++it) {
        res.iters = it;
        const Eigen::Vector3d g = varpi_gradient(res.p, plan, msgs, exclude);
        if (g.norm() < opts.grad_tol) {
            res.converged = true;
            break;
        }
        // The objective forms an extremely anisotropic ridge along the range
        // direction (conditioning ~ (range / subarray offset)^2), so the
        // ascent direction is preconditioned by the Hessian with its
        // eigenvalues floored to keep it an ascent direction.
        const Eigen::Matrix3d hess = varpi_hessian(res.p, plan, msgs, exclude);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(-hess);
        const double lam_max = es.eigenvalues().maxCoeff();
        Eigen::Vector3d dir;
        if (lam_max <= 0.0) {
            dir = g / g.norm();
        } else {
            const double floor = 1e-9 * lam_max;
            const Eigen::Vector3d lam = es.eigenvalues().cwiseMax(floor);
            dir = es.eigenvectors() *
                  (es.eigenvectors().transpose() * g).cwiseQuotient(lam);
        }
        const double slope = g.dot(dir);
        if (slope <= 0.0) break;

        // Cap the first probe so a floored Newton direction cannot jump
        // across the scene (and into a subarray center).
        const double move_cap = 1.0 + res.p.norm();
        double step = std::min(opts.initial_step, move_cap / dir.norm());
        bool accepted = false;
        for (int bt = 0; bt < 80; ++bt) {
            Eigen::Vector3d trial = res.p + step * dir;
            trial.z() = std::max(trial.z(), opts.min_z);
            const double range = trial.norm();
            if (range > opts.max_range) trial *= opts.max_range / range;
            double f_trial;
            try {
                f_trial = varpi(trial, plan, msgs, exclude);
            } catch (const std::domain_error&) {
                step *= opts.shrink; // probe hit a subarray center
                continue;
            }
            if (std::isnan(f_trial)) {
                throw std::runtime_error("maximize_varpi: non-finite objective at [" +
                                         std::to_string(trial.x()) + ", " +
                                         std::to_string(trial.y()) + ", " +
                                         std::to_string(trial.z()) + "]");
            }
            if (f_trial >= res.value + opts.armijo * step * slope) {
                res.p = trial;
                res.value = f_trial;
                accepted = true;
                break;
            }
            step *= opts.shrink;
        }
        if (!accepted) break; // no ascent step exists at this scale
    }
    res.hessian = varpi_hessian(res.p, plan, msgs, exclude);
    return res;
}

GaussianBelief3 gaussian_belief(const Eigen::Vector3d& p_hat, const Eigen::Matrix3d& hessian,
                                bool* regularized) {
    if (regularized) *regularized = false;
    const Eigen::Matrix3d s = -0.5 * (hessian + hessian.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(s);
    const double ridge = 1e-9 * std::abs(s.trace()) / 3.0 + 1e-12;
    Eigen::Vector3d lam = es.eigenvalues();
    const double floor = std::max(1e-12 * lam.cwiseAbs().maxCoeff(), ridge);
    if (lam.minCoeff() < floor) {
        if (regularized) *regularized = true;
        lam = lam.cwiseMax(floor);
    }
    Eigen::Matrix3d cov = es.eigenvectors() * lam.cwiseInverse().asDiagonal() *
                          es.eigenvectors().transpose();
    cov = 0.5 * (cov + cov.transpose());
    return GaussianBelief3(p_hat, cov);
}

VonMisesMessage projection_message(const GaussianBelief3& belief,
                                   const Eigen::Vector3d& p_bs_m, int axis,
                                   bool* degenerate) {
    if (degenerate) *degenerate = false;
    const Eigen::Vector3d u_bar = p_bs_m - belief.mean;
    const double u_norm = u_bar.norm();
    Eigen::Vector3d e_u = Eigen::Vector3d::Zero();
    e_u(axis) = 1.0;
    const double theta_bar = (u_norm > 0.0) ? u_bar.dot(e_u) / u_norm : 1.0;
    if (u_norm < 1e-12 || std::abs(theta_bar) >= 1.0 - 1e-9) {
        if (degenerate) *degenerate = true;
        return VonMisesMessage::uniform();
    }
    const Eigen::Vector3d w = (u_bar.cross(e_u)).cross(u_bar);
    const double w_norm = w.norm();
    if (w_norm < 1e-12 * u_norm * u_norm) {
        if (degenerate) *degenerate = true;
        return VonMisesMessage::uniform();
    }
    const Eigen::Vector3d v = w / w_norm;
    const double vcv = v.dot(belief.cov * v);
    const double kappa = u_norm * u_norm /
                         (M_PI * M_PI * (1.0 - theta_bar * theta_bar) * std::max(vcv, 1e-300));
    return VonMisesMessage(M_PI * theta_bar, std::min(kappa, kKappaCap));
}

Eigen::Vector3d triangulate_init(const PartitionPlan& plan,
                                 const std::vector<VonMisesMessage>& msgs,
                                 double nominal_range) {
    // Mean look direction from the per-subarray modes; e_n has a negative z
    // component for a source in front of the array.
    Eigen::Vector3d dir = Eigen::Vector3d::Zero();
    int informative = 0;
    for (int m = 1; m <= plan.count(); ++m) {
        const auto& mx = msgs[fusion_slot(m, 0)];
        const auto& my = msgs[fusion_slot(m, 1)];
        if (mx.kappa == 0.0 && my.kappa == 0.0) continue;
        const double tx = vm_mode_theta(mx);
        const double ty = vm_mode_theta(my);
        const double tz2 = 1.0 - tx * tx - ty * ty;
        Eigen::Vector3d e_n(tx, ty, -std::sqrt(std::max(0.0, tz2)));
        dir -= e_n; // from the array toward the source
        ++informative;
    }
    if (informative == 0 || dir.norm() < 1e-9 || dir.z() <= 0.0) {
        dir = Eigen::Vector3d(0.0, 0.0, 1.0);
    }
    dir.normalize();
    const Eigen::Vector3d p0 = nominal_range * dir;

    // Axis-aligned constraints touch x and y only; z stays at the nominal point.
    Eigen::Vector3d p = p0;
    for (int axis = 0; axis < 2; ++axis) {
        double num = 0.0;
        int count = 0;
        for (int m = 1; m <= plan.count(); ++m) {
            const auto& msg = msgs[fusion_slot(m, axis)];
            if (msg.kappa == 0.0) continue;
            const double rho = (plan.subarray_centers[m - 1] - p0).norm();
            num += plan.subarray_centers[m - 1](axis) - vm_mode_theta(msg) * rho;
            ++count;
        }
        if (count > 0) p(axis) = num / count;
    }
    if (p.z() <= 0.0) p.z() = 0.5 * nominal_range;
    return p;
}

} // namespace nfloc
