#include "nfloc/omp_baseline.hpp"

#include <cmath>
#include <stdexcept>

namespace nfloc {

PolarGrid PolarGrid::for_geometry(const ArrayGeometry& geom) {
    PolarGrid grid;
    const RegionBoundaries rb = region_boundaries(geom);
    grid.r_min = std::max(rb.fresnel_m, 0.5);
    grid.r_max = 1.5 * rb.fraunhofer_m;
    return grid;
}

int PolarGrid::r_count() const {
    return static_cast<int>(std::floor((r_max - r_min) / r_step + 1e-9)) + 1;
}

int PolarGrid::omega_count() const {
    int n = static_cast<int>(std::ceil(2.0 * M_PI / omega_step - 1e-9));
    return std::max(n, 1);
}

int PolarGrid::phi_count() const {
    int n = static_cast<int>(std::ceil(0.5 * M_PI / phi_step - 1e-9));
    return std::max(n, 1);
}

void PolarGrid::validate() const {
    if (r_step <= 0.0 || omega_step <= 0.0 || phi_step <= 0.0) {
        throw std::invalid_argument("PolarGrid: steps must be positive");
    }
    if (!(r_min > 0.0) || r_max < r_min) {
        throw std::invalid_argument("PolarGrid: invalid range bracket");
    }
}

LocationEstimate omp_estimate(const Snapshot& snapshot, const ArrayGeometry& geom,
                              const PolarGrid& grid) {
    grid.validate();
    const int n_b = geom.antenna_count();
    if (snapshot.y.size() != n_b) {
        throw std::invalid_argument("omp_estimate: snapshot length does not match geometry");
    }

    // Correlations are scanned in single precision: the common phase
    // k * r_node of each column has unit modulus and is dropped, so the sine
    // arguments stay within a few hundred radians of zero.
    Eigen::ArrayXf xs(n_b), ys(n_b), rho2(n_b), yr(n_b), yi(n_b);
    for (int i = 1; i <= geom.n_x; ++i) {
        for (int j = 1; j <= geom.n_y; ++j) {
            const int t = flat_index(geom, i, j) - 1;
            const Eigen::Vector3d pos = antenna_position(geom, i, j);
            xs(t) = static_cast<float>(pos.x());
            ys(t) = static_cast<float>(pos.y());
            rho2(t) = static_cast<float>(pos.squaredNorm());
            yr(t) = static_cast<float>(snapshot.y(t).real());
            yi(t) = static_cast<float>(snapshot.y(t).imag());
        }
    }
    const float k_wave = static_cast<float>(2.0 * M_PI / geom.wavelength);

    const int nr = grid.r_count();
    const int nw = grid.omega_count();
    const int np = grid.phi_count();

    double best_val = -1.0;
    long best_index = -1;
    double best_r = grid.r_min, best_omega = 0.0, best_phi = 0.0;

    Eigen::ArrayXf num(n_b), rt(n_b), ph(n_b), sn(n_b), cn(n_b);
    for (int ir = 0; ir < nr; ++ir) {
        const double r = grid.r_min + ir * grid.r_step;
        const float r2 = static_cast<float>(r * r);
        const float rf = static_cast<float>(r);
        for (int iw = 0; iw < nw; ++iw) {
            const double omega = iw * grid.omega_step;
            const double co = std::cos(omega), so = std::sin(omega);
            for (int ip = 0; ip < np; ++ip) {
                const double phi = ip * grid.phi_step;
                const double sp = std::sin(phi);
                const float qx = static_cast<float>(r * co * sp);
                const float qy = static_cast<float>(r * so * sp);
                // r_t - r without cancellation: (r_t^2 - r^2) / (r_t + r).
                num = rho2 - 2.0f * (qx * xs + qy * ys);
                rt = (r2 + num).sqrt();
                ph = k_wave * (num / (rt + rf));
                sn = ph.sin();
                cn = ph.cos();
                const float re = (cn * yr - sn * yi).sum();
                const float im = (cn * yi + sn * yr).sum();
                const double val = static_cast<double>(re) * re + static_cast<double>(im) * im;
                const long index = (static_cast<long>(ir) * nw + iw) * np + ip;
                if (val > best_val) {
                    best_val = val;
                    best_index = index;
                    best_r = r;
                    best_omega = omega;
                    best_phi = phi;
                }
            }
        }
    }
    (void)best_index;

    LocationEstimate est;
    const double sp = std::sin(best_phi);
    est.p_hat = Eigen::Vector3d(best_r * std::cos(best_omega) * sp,
                                best_r * std::sin(best_omega) * sp,
                                best_r * std::cos(best_phi));
    // Quantization surrogate: total cell second moment split across axes.
    const double q2 = (grid.r_step * grid.r_step +
                       std::pow(best_r * grid.phi_step, 2) +
                       std::pow(best_r * sp * grid.omega_step, 2)) / 12.0;
    est.belief = GaussianBelief3(est.p_hat, (q2 / 3.0 + 1e-12) * Eigen::Matrix3d::Identity());
    return est;
}

} // namespace nfloc
