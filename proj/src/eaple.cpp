#include "nfloc/eaple.hpp"

#include <cmath>
#include <stdexcept>

namespace nfloc {

namespace {

// Shared state for repeated objective/gradient evaluations on one snapshot.
struct Evaluator {
    Eigen::ArrayXd xs, ys;   // antenna coordinates
    Eigen::ArrayXd yr, yi;   // received signal, split
    double k_wave = 0.0;
    double inv_sigma2 = 0.0;
    double y_norm2 = 0.0;
    int n_b = 0;

    // scratch
    mutable Eigen::ArrayXd rt, ph, sn, cs, wr, wi;

    Evaluator(const Snapshot& snapshot, const ArrayGeometry& geom) {
        n_b = geom.antenna_count();
        if (snapshot.y.size() != n_b) {
            throw std::invalid_argument("eaple: snapshot length does not match the geometry");
        }
        xs.resize(n_b);
        ys.resize(n_b);
        yr.resize(n_b);
        yi.resize(n_b);
        for (int i = 1; i <= geom.n_x; ++i) {
            for (int j = 1; j <= geom.n_y; ++j) {
                const int t = flat_index(geom, i, j) - 1;
                const Eigen::Vector3d pos = antenna_position(geom, i, j);
                xs(t) = pos.x();
                ys(t) = pos.y();
                yr(t) = snapshot.y(t).real();
                yi(t) = snapshot.y(t).imag();
            }
        }
        k_wave = 2.0 * M_PI / geom.wavelength;
        // A zero-variance (noiseless) snapshot keeps the objective on a unit
        // scale; sigma2 only scales F.
        inv_sigma2 = snapshot.noise_variance > 0.0 ? 1.0 / snapshot.noise_variance : 1.0;
        y_norm2 = snapshot.y.squaredNorm();
        rt.resize(n_b);
        ph.resize(n_b);
        sn.resize(n_b);
        cs.resize(n_b);
        wr.resize(n_b);
        wi.resize(n_b);
    }

    // c = a(p)^H y = sum_t exp(+j k r_t) y_t; w_t = exp(+j k r_t) y_t kept for
    // the gradient pass.
    std::complex<double> correlation(const Eigen::Vector3d& p, bool keep_terms) const {
        rt = ((xs - p.x()).square() + (ys - p.y()).square() + p.z() * p.z()).sqrt();
        ph = k_wave * rt;
        sn = ph.sin();
        cs = ph.cos();
        if (keep_terms) {
            wr = cs * yr - sn * yi;
            wi = cs * yi + sn * yr;
            return {wr.sum(), wi.sum()};
        }
        return {(cs * yr - sn * yi).sum(), (cs * yi + sn * yr).sum()};
    }

    double objective(const Eigen::Vector3d& p) const {
        const std::complex<double> c = correlation(p, false);
        return -inv_sigma2 * (y_norm2 - std::norm(c) / n_b);
    }

    // dF/dp at p; also returns F.
    double objective_and_gradient(const Eigen::Vector3d& p, Eigen::Vector3d& grad) const {
        const std::complex<double> c = correlation(p, true);
        // dc/dp = j k sum w_t (p - p_t) / r_t, so
        // d|c|^2/dp = -2k sum Im(conj(c) w_t) (p - p_t) / r_t.
        const Eigen::ArrayXd im_cw = c.real() * wi - c.imag() * wr;
        const Eigen::ArrayXd scale = im_cw / rt;
        const double gx = (scale * (p.x() - xs)).sum();
        const double gy = (scale * (p.y() - ys)).sum();
        const double gz = scale.sum() * p.z();
        grad = (-2.0 * k_wave * inv_sigma2 / n_b) * Eigen::Vector3d(gx, gy, gz);
        return -inv_sigma2 * (y_norm2 - std::norm(c) / n_b);
    }
};

Eigen::Matrix<double, 3, 2> angle_jacobian(const PolarPoint& q) {
    Eigen::Matrix<double, 3, 2> j;
    const double so = std::sin(q.omega), co = std::cos(q.omega);
    const double sp = std::sin(q.phi), cp = std::cos(q.phi);
    j.col(0) << -q.r * so * sp, q.r * co * sp, 0.0;          // d p / d omega
    j.col(1) << q.r * co * cp, q.r * so * cp, -q.r * sp;     // d p / d phi
    return j;
}

Eigen::Vector3d range_direction(const PolarPoint& q) {
    return {std::cos(q.omega) * std::sin(q.phi), std::sin(q.omega) * std::sin(q.phi),
            std::cos(q.phi)};
}

double wrap_two_pi(double a) {
    double w = std::fmod(a, 2.0 * M_PI);
    if (w < 0.0) w += 2.0 * M_PI;
    return w;
}

} // namespace

Eigen::Vector3d PolarPoint::to_cartesian() const {
    return r * range_direction(*this);
}

PolarPoint PolarPoint::from_cartesian(const Eigen::Vector3d& p) {
    PolarPoint q;
    q.r = p.norm();
    if (q.r <= 0.0) throw std::invalid_argument("PolarPoint: zero-length position");
    q.omega = wrap_two_pi(std::atan2(p.y(), p.x()));
    q.phi = std::acos(std::min(1.0, std::max(-1.0, p.z() / q.r)));
    return q;
}

double ml_objective(const Snapshot& snapshot, const ArrayGeometry& geom, const PolarPoint& q) {
    const Eigen::VectorXcd a = nearfield_steering(geom, q.to_cartesian());
    const std::complex<double> gain = a.dot(snapshot.y) / a.squaredNorm();
    const double inv_sigma2 =
        snapshot.noise_variance > 0.0 ? 1.0 / snapshot.noise_variance : 1.0;
    return -inv_sigma2 * (snapshot.y - gain * a).squaredNorm();
}

double ml_objective_corr(const Snapshot& snapshot, const ArrayGeometry& geom,
                         const PolarPoint& q) {
    return Evaluator(snapshot, geom).objective(q.to_cartesian());
}

ComplexGain ls_gain(const Snapshot& snapshot, const ArrayGeometry& geom, const PolarPoint& q) {
    const Eigen::VectorXcd a = nearfield_steering(geom, q.to_cartesian());
    return ComplexGain(a.dot(snapshot.y) / a.squaredNorm());
}

Eigen::Vector2d gradient_angles(const Snapshot& snapshot, const ArrayGeometry& geom,
                                const PolarPoint& q) {
    Evaluator ev(snapshot, geom);
    Eigen::Vector3d g;
    ev.objective_and_gradient(q.to_cartesian(), g);
    return angle_jacobian(q).transpose() * g;
}

double gradient_range(const Snapshot& snapshot, const ArrayGeometry& geom,
                      const PolarPoint& q) {
    Evaluator ev(snapshot, geom);
    Eigen::Vector3d g;
    ev.objective_and_gradient(q.to_cartesian(), g);
    return range_direction(q).dot(g);
}

EapleResult bca_refine(const Snapshot& snapshot, const ArrayGeometry& geom,
                       const PolarPoint& init, const EapleConfig& cfg) {
    Evaluator ev(snapshot, geom);
    EapleResult res;
    PolarPoint q = init;
    q.omega = wrap_two_pi(q.omega);
    q.phi = std::min(M_PI / 2.0 - cfg.phi_margin, std::max(cfg.phi_margin, q.phi));
    q.r = std::max(cfg.r_min, q.r);

    double f_cur = ev.objective(q.to_cartesian());
    res.trace.push_back({0, f_cur, q.r, q.omega, q.phi});

    auto clamp_q = [&cfg](PolarPoint& qq) {
        qq.omega = wrap_two_pi(qq.omega);
        qq.phi = std::min(M_PI / 2.0 - cfg.phi_margin, std::max(cfg.phi_margin, qq.phi));
        qq.r = std::max(cfg.r_min, qq.r);
    };

    for (int outer = 1; outer <= cfg.t3; ++outer) {
        const double f_outer_start = f_cur;

        // Sub-problem 1: angles with r fixed.
        for (int it = 0; it < cfg.t_theta; ++it) {
            ++res.inner_iterations;
            Eigen::Vector3d g3;
            ev.objective_and_gradient(q.to_cartesian(), g3);
            const Eigen::Vector2d g = angle_jacobian(q).transpose() * g3;
            if (!g.allFinite()) {
                throw std::runtime_error("bca_refine: non-finite angle gradient at r=" +
                                         std::to_string(q.r));
            }
            const double gn = g.norm();
            if (gn < 1e-300) break;
            double eps = cfg.angle_step / gn; // first trial moves ~angle_step radians
            bool accepted = false;
            for (int bt = 0; bt < 60; ++bt) {
                PolarPoint trial = q;
                trial.omega += eps * g(0);
                trial.phi += eps * g(1);
                clamp_q(trial);
                const double f_trial = ev.objective(trial.to_cartesian());
                if (f_trial >= f_cur + cfg.armijo * eps * gn * gn) {
                    q = trial;
                    f_cur = f_trial;
                    accepted = true;
                    break;
                }
                eps *= cfg.shrink;
            }
            if (!accepted) break;
        }

        // Sub-problem 2: range with angles fixed.
        for (int it = 0; it < cfg.t_r; ++it) {
            ++res.inner_iterations;
            Eigen::Vector3d g3;
            ev.objective_and_gradient(q.to_cartesian(), g3);
            const double gr = range_direction(q).dot(g3);
            if (!std::isfinite(gr)) {
                throw std::runtime_error("bca_refine: non-finite range gradient at r=" +
                                         std::to_string(q.r));
            }
            const double gn = std::abs(gr);
            if (gn < 1e-300) break;
            double eps = cfg.range_step_frac * q.r / gn;
            bool accepted = false;
            for (int bt = 0; bt < 60; ++bt) {
                PolarPoint trial = q;
                trial.r += eps * gr;
                clamp_q(trial);
                const double f_trial = ev.objective(trial.to_cartesian());
                if (f_trial >= f_cur + cfg.armijo * eps * gn * gn) {
                    q = trial;
                    f_cur = f_trial;
                    accepted = true;
                    break;
                }
                eps *= cfg.shrink;
            }
            if (!accepted) break;
        }

        res.trace.push_back({outer, f_cur, q.r, q.omega, q.phi});
        if (std::abs(f_cur - f_outer_start) <= cfg.rel_ftol * std::max(1.0, std::abs(f_outer_start))) {
            break;
        }
    }

    res.q = q;
    res.p_hat = q.to_cartesian();
    res.f_final = f_cur;
    return res;
}

} // namespace nfloc
