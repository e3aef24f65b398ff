#include "nfloc/aoa_estimator.hpp"

#include <cmath>
#include <stdexcept>

namespace nfloc {

namespace {

// Correlation c(theta) = a_F(theta)^H y and the weighted sums needed for its
// first and second derivatives. Uses the separable structure of the planar
// steering vector: inner reduction over l, outer over k.
struct CorrelationDerivs {
    std::complex<double> c, c_x, c_y, c_xx, c_yy, c_xy;
};

CorrelationDerivs correlation_derivs(const Eigen::VectorXcd& y, int n_mx, int n_my,
                                     double beta_x, double beta_y,
                                     double theta_x, double theta_y) {
    Eigen::VectorXcd s0 = Eigen::VectorXcd::Zero(n_mx);
    Eigen::VectorXcd s1 = Eigen::VectorXcd::Zero(n_mx);
    Eigen::VectorXcd s2 = Eigen::VectorXcd::Zero(n_mx);
    for (int l = 0; l < n_my; ++l) {
        const double lt = l + 1 - 0.5 * (n_my + 1);
        const std::complex<double> w = std::polar(1.0, -beta_y * lt * theta_y);
        for (int k = 0; k < n_mx; ++k) {
            const std::complex<double> v = w * y(k * n_my + l);
            s0(k) += v;
            s1(k) += lt * v;
            s2(k) += lt * lt * v;
        }
    }
    CorrelationDerivs d{};
    std::complex<double> m10 = 0.0, m20 = 0.0, m01 = 0.0, m02 = 0.0, m11 = 0.0, m00 = 0.0;
    for (int k = 0; k < n_mx; ++k) {
        const double kt = k + 1 - 0.5 * (n_mx + 1);
        const std::complex<double> w = std::polar(1.0, -beta_x * kt * theta_x);
        m00 += w * s0(k);
        m10 += kt * w * s0(k);
        m20 += kt * kt * w * s0(k);
        m01 += w * s1(k);
        m02 += w * s2(k);
        m11 += kt * w * s1(k);
    }
    const std::complex<double> jneg(0.0, -1.0);
    d.c = m00;
    d.c_x = jneg * beta_x * m10;
    d.c_y = jneg * beta_y * m01;
    d.c_xx = -beta_x * beta_x * m20;
    d.c_yy = -beta_y * beta_y * m02;
    d.c_xy = -beta_x * beta_y * m11;
    return d;
}

struct Objective {
    double value;
    Eigen::Vector2d grad;
    Eigen::Matrix2d hess;
};

// Concentrated log-likelihood plus VM prior log-densities over (theta_x, theta_y).
Objective evaluate(const Eigen::VectorXcd& y, int n_mx, int n_my, double beta_x,
                   double beta_y, double inv_s2n, const VonMisesMessage& prior_x,
                   const VonMisesMessage& prior_y, double theta_x, double theta_y,
                   bool with_derivs) {
    Objective obj{};
    const auto d = correlation_derivs(y, n_mx, n_my, beta_x, beta_y, theta_x, theta_y);
    obj.value = inv_s2n * std::norm(d.c)
              + prior_x.kappa * std::cos(M_PI * theta_x - prior_x.mu)
              + prior_y.kappa * std::cos(M_PI * theta_y - prior_y.mu);
    if (!with_derivs) return obj;

    const double gx = 2.0 * std::real(std::conj(d.c) * d.c_x);
    const double gy = 2.0 * std::real(std::conj(d.c) * d.c_y);
    const double hxx = 2.0 * std::real(std::conj(d.c) * d.c_xx) + 2.0 * std::norm(d.c_x);
    const double hyy = 2.0 * std::real(std::conj(d.c) * d.c_yy) + 2.0 * std::norm(d.c_y);
    const double hxy = 2.0 * std::real(std::conj(d.c) * d.c_xy)
                     + 2.0 * std::real(d.c_x * std::conj(d.c_y));
    obj.grad(0) = inv_s2n * gx - M_PI * prior_x.kappa * std::sin(M_PI * theta_x - prior_x.mu);
    obj.grad(1) = inv_s2n * gy - M_PI * prior_y.kappa * std::sin(M_PI * theta_y - prior_y.mu);
    obj.hess(0, 0) = inv_s2n * hxx
                   - M_PI * M_PI * prior_x.kappa * std::cos(M_PI * theta_x - prior_x.mu);
    obj.hess(1, 1) = inv_s2n * hyy
                   - M_PI * M_PI * prior_y.kappa * std::cos(M_PI * theta_y - prior_y.mu);
    obj.hess(0, 1) = obj.hess(1, 0) = inv_s2n * hxy;
    return obj;
}

double clip_theta(double t) {
    constexpr double lim = 1.0 - 1e-9;
    return std::min(lim, std::max(-lim, t));
}

// Magnitude peak of the zero-padded 2-D DFT, restricted to bins mapping into
// |theta| <= 1. The symmetric index offset only rotates each bin's phase, so
// the plain DFT magnitude is the correlation magnitude.
std::pair<double, double> coarse_peak(const Eigen::VectorXcd& y, int n_mx, int n_my,
                                      double d_x, double d_y, double wavelength,
                                      int pad_factor) {
    const int px = pad_factor * n_mx;
    const int py = pad_factor * n_my;
    Eigen::MatrixXcd ym(n_mx, n_my);
    for (int k = 0; k < n_mx; ++k) {
        for (int l = 0; l < n_my; ++l) ym(k, l) = y(k * n_my + l);
    }
    Eigen::MatrixXcd wx(px, n_mx);
    for (int p = 0; p < px; ++p) {
        for (int k = 0; k < n_mx; ++k) wx(p, k) = std::polar(1.0, -2.0 * M_PI * p * k / px);
    }
    Eigen::MatrixXcd wy(py, n_my);
    for (int q = 0; q < py; ++q) {
        for (int l = 0; l < n_my; ++l) wy(q, l) = std::polar(1.0, -2.0 * M_PI * q * l / py);
    }
    const Eigen::MatrixXcd spec = wx * ym * wy.transpose();

    auto bin_theta = [](int p, int n_fft, double d, double lambda) {
        double f = static_cast<double>(p) / n_fft;
        if (f >= 0.5) f -= 1.0;
        return f * lambda / d;
    };
    double best = -1.0;
    double tx = 0.0, ty = 0.0;
    for (int p = 0; p < px; ++p) {
        const double cand_x = bin_theta(p, px, d_x, wavelength);
        if (std::abs(cand_x) > 1.0) continue;
        for (int q = 0; q < py; ++q) {
            const double cand_y = bin_theta(q, py, d_y, wavelength);
            if (std::abs(cand_y) > 1.0) continue;
            const double mag = std::norm(spec(p, q));
            if (mag > best) {
                best = mag;
                tx = cand_x;
                ty = cand_y;
            }
        }
    }
    return {clip_theta(tx), clip_theta(ty)};
}

} // namespace

AoaPosterior estimate_posterior(const Eigen::VectorXcd& y_m, int n_mx, int n_my,
                                double d_x, double d_y, double wavelength, double sigma2,
                                const VonMisesMessage& prior_x, const VonMisesMessage& prior_y,
                                const AoaEstimatorConfig& cfg) {
    const int n_m = n_mx * n_my;
    if (y_m.size() != n_m) {
        throw std::invalid_argument("estimate_posterior: snapshot length does not match dims");
    }
    AoaPosterior post;
    if (y_m.squaredNorm() == 0.0) {
        post.theta_x = VonMisesMessage::uniform();
        post.theta_y = VonMisesMessage::uniform();
        post.alpha_hat = ComplexGain(0.0);
        return post;
    }

    const double beta_x = 2.0 * M_PI * d_x / wavelength;
    const double beta_y = 2.0 * M_PI * d_y / wavelength;
    const double inv_s2n = 1.0 / (sigma2 * n_m);

    auto [theta_x, theta_y] = coarse_peak(y_m, n_mx, n_my, d_x, d_y, wavelength, cfg.pad_factor);

    auto eval = [&](double tx, double ty, bool derivs) {
        return evaluate(y_m, n_mx, n_my, beta_x, beta_y, inv_s2n, prior_x, prior_y, tx, ty,
                        derivs);
    };

    Objective cur = eval(theta_x, theta_y, true);
    const int newton_iters = std::min(cfg.max_newton_iters, cfg.iteration_budget);
    for (int it = 0; it < newton_iters; ++it) {
        if (cur.grad.lpNorm<Eigen::Infinity>() <= cfg.grad_tol * (1.0 + std::abs(cur.value))) {
            break;
        }
        Eigen::Vector2d dir;
        const double det = cur.hess.determinant();
        const double trace = cur.hess.trace();
        if (det > 0.0 && trace < 0.0) {
            dir = -cur.hess.ldlt().solve(cur.grad); // Newton step at a proper maximum
        } else {
            const double scale = std::max(1.0, cur.grad.norm());
            dir = cur.grad / scale; // fall back to normalized ascent
        }
        const double slope = cur.grad.dot(dir);
        if (slope <= 0.0) break;
        double step = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 40; ++bt) {
            const double tx = clip_theta(theta_x + step * dir(0));
            const double ty = clip_theta(theta_y + step * dir(1));
            Objective trial = eval(tx, ty, false);
            if (trial.value >= cur.value + 1e-4 * step * slope) {
                theta_x = tx;
                theta_y = ty;
                cur = eval(tx, ty, true);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }

    const double kappa_x = std::min(kKappaCap, std::max(0.0, -cur.hess(0, 0)) / (M_PI * M_PI));
    const double kappa_y = std::min(kKappaCap, std::max(0.0, -cur.hess(1, 1)) / (M_PI * M_PI));
    post.theta_x = VonMisesMessage(wrap_angle(M_PI * theta_x), kappa_x);
    post.theta_y = VonMisesMessage(wrap_angle(M_PI * theta_y), kappa_y);

    const auto d = correlation_derivs(y_m, n_mx, n_my, beta_x, beta_y, theta_x, theta_y);
    post.alpha_hat = ComplexGain(d.c / static_cast<double>(n_m));
    return post;
}

std::pair<VonMisesMessage, VonMisesMessage>
extrinsic_from_posterior(const AoaPosterior& post, const VonMisesMessage& prior_x,
                         const VonMisesMessage& prior_y) {
    return {vm_extrinsic(post.theta_x, prior_x), vm_extrinsic(post.theta_y, prior_y)};
}

} // namespace nfloc
