#include "nfloc/channel.hpp"

#include "nfloc/vonmises.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace nfloc {

ComplexGain ComplexGain::from_polar(double magnitude, double phase) {
    if (magnitude < 0.0) throw std::invalid_argument("ComplexGain: magnitude must be >= 0");
    return ComplexGain(std::polar(magnitude, phase));
}

double ComplexGain::phase() const {
    return wrap_angle(std::arg(value));
}

Eigen::VectorXcd nearfield_steering(const ArrayGeometry& geom, const Eigen::Vector3d& p_u) {
    const double k_wave = 2.0 * M_PI / geom.wavelength;
    Eigen::VectorXcd a(geom.antenna_count());
    for (int i = 1; i <= geom.n_x; ++i) {
        for (int j = 1; j <= geom.n_y; ++j) {
            const double r = (antenna_position(geom, i, j) - p_u).norm();
            if (r < 1e-12) {
                throw std::domain_error("nearfield_steering: point coincides with an antenna");
            }
            a(flat_index(geom, i, j) - 1) = std::polar(1.0, -k_wave * r);
        }
    }
    return a;
}

Eigen::VectorXcd farfield_steering(int n_mx, int n_my, double d_x, double d_y,
                                   double wavelength, double theta_x, double theta_y) {
    if (std::abs(theta_x) > 1.0 || std::abs(theta_y) > 1.0) {
        throw std::domain_error("farfield_steering: |theta| must not exceed 1");
    }
    const double beta_x = 2.0 * M_PI * d_x * theta_x / wavelength;
    const double beta_y = 2.0 * M_PI * d_y * theta_y / wavelength;
    Eigen::VectorXcd a(n_mx * n_my);
    for (int k = 1; k <= n_mx; ++k) {
        const double kt = k - 0.5 * (n_mx + 1);
        for (int l = 1; l <= n_my; ++l) {
            const double lt = l - 0.5 * (n_my + 1);
            a((k - 1) * n_my + (l - 1)) = std::polar(1.0, beta_x * kt + beta_y * lt);
        }
    }
    return a;
}

Snapshot synthesize_snapshot(const ArrayGeometry& geom, const UeLocation& p_u,
                             const ComplexGain& alpha, double sigma2, std::uint64_t seed) {
    if (sigma2 < 0.0) throw std::invalid_argument("synthesize_snapshot: sigma2 must be >= 0");
    Snapshot snap;
    snap.y = alpha.value * nearfield_steering(geom, p_u.cartesian);
    snap.noise_variance = sigma2;
    snap.truth = SnapshotTruth{p_u, alpha, seed};
    if (sigma2 > 0.0) {
        std::seed_seq seq{static_cast<std::uint64_t>(0x6e666c6f63ULL), seed};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> gauss(0.0, std::sqrt(sigma2 / 2.0));
        for (int t = 0; t < snap.y.size(); ++t) {
            snap.y(t) += std::complex<double>(gauss(rng), gauss(rng));
        }
    }
    return snap;
}

double snr(const ComplexGain& alpha, double sigma2) {
    if (sigma2 <= 0.0) throw std::invalid_argument("snr: sigma2 must be positive");
    return std::norm(alpha.value) / sigma2;
}

double snr_db_to_sigma2(double snr_db, double alpha_magnitude) {
    return alpha_magnitude * alpha_magnitude * std::pow(10.0, -snr_db / 10.0);
}

Eigen::VectorXcd subarray_view(const Snapshot& snapshot, const PartitionPlan& plan, int m) {
    if (m < 1 || m > plan.count()) {
        throw std::out_of_range("subarray_view: subarray index out of range");
    }
    const auto& idx = plan.subarray_flat_indices[m - 1];
    Eigen::VectorXcd v(static_cast<int>(idx.size()));
    for (std::size_t t = 0; t < idx.size(); ++t) {
        v(static_cast<int>(t)) = snapshot.y(idx[t] - 1);
    }
    return v;
}

void write_snapshot(const std::string& path, const Snapshot& snapshot) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_snapshot: cannot open " + path);
    const std::uint64_t n = static_cast<std::uint64_t>(snapshot.y.size());
    const double sigma2 = snapshot.noise_variance;
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(&sigma2), sizeof(sigma2));
    for (int t = 0; t < snapshot.y.size(); ++t) {
        const double re = snapshot.y(t).real();
        const double im = snapshot.y(t).imag();
        out.write(reinterpret_cast<const char*>(&re), sizeof(re));
        out.write(reinterpret_cast<const char*>(&im), sizeof(im));
    }
    if (!out) throw std::runtime_error("write_snapshot: write failed for " + path);
}

Snapshot read_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_snapshot: cannot open " + path);
    std::uint64_t n = 0;
    double sigma2 = 0.0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    in.read(reinterpret_cast<char*>(&sigma2), sizeof(sigma2));
    Snapshot snap;
    snap.noise_variance = sigma2;
    snap.y.resize(static_cast<int>(n));
    for (std::uint64_t t = 0; t < n; ++t) {
        double re = 0.0;
        double im = 0.0;
        in.read(reinterpret_cast<char*>(&re), sizeof(re));
        in.read(reinterpret_cast<char*>(&im), sizeof(im));
        snap.y(static_cast<int>(t)) = {re, im};
    }
    if (!in) throw std::runtime_error("read_snapshot: truncated file " + path);
    return snap;
}

} // namespace nfloc
